#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "caris/bridge/teleop.hpp"
#include "caris/error.hpp"
#include "caris/json.hpp"

namespace caris::conversation {

CARIS_DEFINE_ERROR(InvalidScenario, Error);

enum class ProviderKind { Cloud, Local, Mock };
const char* to_string(ProviderKind k);

struct ProviderSpec {
  std::string name;
  ProviderKind kind = ProviderKind::Mock;
  std::string model;
  bool supports_images = false;
  std::string endpoint;         // base URL; empty for mock
  std::string credentials_env;  // name of the env var holding the key
  int stall_ms = 0;             // mock only: delay before answering
};

Json provider_to_json(const ProviderSpec& p);
ProviderSpec provider_from_json(const Json& j);

/// gemini-flash-1.5 (cloud), llama-3.1-8b (local, text only), llava-7b
/// (local, images) and mock.
std::vector<ProviderSpec> builtin_providers();

struct QuickPhrase {
  std::string text;
  std::vector<std::string> triggers;
};

struct Template {
  std::string template_id;
  std::string body;  // "{name}" placeholders
  std::vector<std::string> required_vars;
};

struct Features {
  bool photo_capture = true;
  bool stt = true;
  bool tts = true;
  bool llm = true;
};

struct ScenarioConfig {
  std::string name = "default";
  Features enabled_features;
  std::vector<QuickPhrase> quick_phrases;
  std::vector<Template> templates;
  std::string default_role;
  std::string provider = "mock";
  std::vector<ProviderSpec> providers;  // scenario-local additions/overrides
  bridge::TeleopLimits teleop;

  /// Builtins overlaid with scenario-local specs of the same name.
  std::vector<ProviderSpec> all_providers() const;
  std::optional<ProviderSpec> find_provider(const std::string& name) const;
  const Template* find_template(const std::string& id) const;
};

/// Throws InvalidScenario if the provider or a template is dangling, no
/// communication channel (stt, tts, llm) is enabled, or limits are not
/// positive.
void validate(const ScenarioConfig& s);

Json scenario_to_json(const ScenarioConfig& s);
/// Parses and validates.
ScenarioConfig scenario_from_json(const Json& j);
ScenarioConfig load_scenario(const std::filesystem::path& file);

}  // namespace caris::conversation
