#include "caris/conversation/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace caris::conversation {

const char* to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::Cloud:
      return "cloud";
    case ProviderKind::Local:
      return "local";
    case ProviderKind::Mock:
      return "mock";
  }
  return "?";
}

namespace {

ProviderKind parse_kind(const std::string& s) {
  if (s == "cloud") return ProviderKind::Cloud;
  if (s == "local") return ProviderKind::Local;
  if (s == "mock") return ProviderKind::Mock;
  throw InvalidScenario("unknown provider kind '" + s + "'");
}

}  // namespace

Json provider_to_json(const ProviderSpec& p) {
  Json j{{"name", p.name}, {"kind", to_string(p.kind)}, {"model", p.model}, {"supports_images", p.supports_images}};
  if (!p.endpoint.empty()) j["endpoint"] = p.endpoint;
  if (!p.credentials_env.empty()) j["credentials_env"] = p.credentials_env;
  if (p.stall_ms != 0) j["stall_ms"] = p.stall_ms;
  return j;
}

ProviderSpec provider_from_json(const Json& j) {
  ProviderSpec p;
  p.name = j.at("name").get<std::string>();
  p.kind = parse_kind(j.at("kind").get<std::string>());
  p.model = j.value("model", p.name);
  p.supports_images = j.value("supports_images", false);
  p.endpoint = j.value("endpoint", std::string());
  p.credentials_env = j.value("credentials_env", std::string());
  p.stall_ms = j.value("stall_ms", 0);
  return p;
}

std::vector<ProviderSpec> builtin_providers() {
  return {
      {"gemini-flash-1.5", ProviderKind::Cloud, "gemini-1.5-flash", true, "https://generativelanguage.googleapis.com",
       "GEMINI_API_KEY", 0},
      {"llama-3.1-8b", ProviderKind::Local, "llama3.1:8b", false, "http://127.0.0.1:11434", "", 0},
      {"llava-7b", ProviderKind::Local, "llava:7b", true, "http://127.0.0.1:11434", "", 0},
      {"mock", ProviderKind::Mock, "mock", true, "", "", 0},
  };
}

std::vector<ProviderSpec> ScenarioConfig::all_providers() const {
  std::vector<ProviderSpec> out = builtin_providers();
  for (const auto& p : providers) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ProviderSpec& q) { return q.name == p.name; });
    if (it != out.end()) {
      *it = p;
    } else {
      out.push_back(p);
    }
  }
  return out;
}

std::optional<ProviderSpec> ScenarioConfig::find_provider(const std::string& name) const {
  for (const auto& p : all_providers()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

const Template* ScenarioConfig::find_template(const std::string& id) const {
  for (const auto& t : templates) {
    if (t.template_id == id) return &t;
  }
  return nullptr;
}

void validate(const ScenarioConfig& s) {
  if (s.name.empty()) throw InvalidScenario("scenario name is empty");
  if (!s.find_provider(s.provider)) throw InvalidScenario("unknown provider '" + s.provider + "'");
  const Features& f = s.enabled_features;
  if (!f.stt && !f.tts && !f.llm) throw InvalidScenario("no communication channel enabled");
  if (!(s.teleop.max_linear > 0.0) || !(s.teleop.max_angular > 0.0) || !std::isfinite(s.teleop.max_linear) ||
      !std::isfinite(s.teleop.max_angular)) {
    throw InvalidScenario("teleop limits must be positive");
  }
  std::set<std::string> ids;
  for (const auto& t : s.templates) {
    if (t.template_id.empty() || !ids.insert(t.template_id).second) {
      throw InvalidScenario("template ids must be unique and non-empty");
    }
  }
  for (const auto& q : s.quick_phrases) {
    if (q.text.empty()) throw InvalidScenario("empty quick phrase");
  }
}

Json scenario_to_json(const ScenarioConfig& s) {
  Json phrases = Json::array();
  for (const auto& q : s.quick_phrases) phrases.push_back(Json{{"text", q.text}, {"triggers", q.triggers}});
  Json templates = Json::array();
  for (const auto& t : s.templates) {
    templates.push_back(Json{{"template_id", t.template_id}, {"body", t.body}, {"required_vars", t.required_vars}});
  }
  Json providers = Json::array();
  for (const auto& p : s.providers) providers.push_back(provider_to_json(p));
  const Features& f = s.enabled_features;
  return Json{{"name", s.name},
              {"enabled_features", {{"photo_capture", f.photo_capture}, {"stt", f.stt}, {"tts", f.tts}, {"llm", f.llm}}},
              {"quick_phrases", std::move(phrases)},
              {"templates", std::move(templates)},
              {"default_role", s.default_role},
              {"provider", s.provider},
              {"providers", std::move(providers)},
              {"teleop", {{"max_linear", s.teleop.max_linear}, {"max_angular", s.teleop.max_angular}}}};
}

ScenarioConfig scenario_from_json(const Json& j) {
  ScenarioConfig s;
  try {
    s.name = j.at("name").get<std::string>();
    if (j.contains("enabled_features")) {
      const Json& f = j.at("enabled_features");
      s.enabled_features = {f.value("photo_capture", true), f.value("stt", true), f.value("tts", true),
                            f.value("llm", true)};
    }
    for (const Json& q : j.value("quick_phrases", Json::array())) {
      s.quick_phrases.push_back({q.at("text").get<std::string>(), q.value("triggers", std::vector<std::string>{})});
    }
    for (const Json& t : j.value("templates", Json::array())) {
      s.templates.push_back({t.at("template_id").get<std::string>(), t.at("body").get<std::string>(),
                             t.value("required_vars", std::vector<std::string>{})});
    }
    s.default_role = j.value("default_role", std::string());
    s.provider = j.value("provider", std::string("mock"));
    for (const Json& p : j.value("providers", Json::array())) s.providers.push_back(provider_from_json(p));
    if (j.contains("teleop")) {
      s.teleop.max_linear = j.at("teleop").value("max_linear", s.teleop.max_linear);
      s.teleop.max_angular = j.at("teleop").value("max_angular", s.teleop.max_angular);
    }
  } catch (const Json::exception& e) {
    throw InvalidScenario(e.what());
  }
  validate(s);
  return s;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidScenario("cannot read " + file.string());
  try {
    return scenario_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw InvalidScenario(file.string() + ": " + e.what());
  }
}

}  // namespace caris::conversation
