#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "caris/conversation/scenario.hpp"
#include "caris/error.hpp"
#include "caris/json.hpp"

namespace caris::conversation {

CARIS_DEFINE_ERROR(ProviderUnavailable, Error);
CARIS_DEFINE_ERROR(UnknownProvider, Error);

enum class Speaker { Wizard, User, Model };
const char* to_string(Speaker s);
Speaker parse_speaker(const std::string& s);

struct ChatMessage {
  Speaker speaker = Speaker::Wizard;
  std::string text;

  bool operator==(const ChatMessage&) const = default;
};

/// What a provider adapter receives. The role prompt goes first as the
/// system-style message; `messages` is already windowed.
struct ProviderRequest {
  std::string model;
  std::string role_prompt;
  std::vector<ChatMessage> messages;
  std::optional<std::vector<std::uint8_t>> image;  // PNG
  std::chrono::milliseconds timeout{30000};
};

/// Adapters throw ProviderUnavailable on transport failures and timeouts.
/// complete() may be called concurrently.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string complete(const ProviderRequest& request) = 0;
  /// Aborts calls in flight, if the adapter can.
  virtual void cancel() {}
};

/// Deterministic stand-in: "role:<role>\n" when a role is set, then
/// "echo:<last message>", then "\nimage:<n> bytes" when an image came
/// along. Optionally stalls before answering; cancel() ends a stall with
/// ProviderUnavailable.
class MockProvider : public Provider {
 public:
  explicit MockProvider(std::chrono::milliseconds stall = std::chrono::milliseconds(0)) : stall_(stall) {}

  std::string complete(const ProviderRequest& request) override;
  void cancel() override;

  void set_stall(std::chrono::milliseconds stall);
  std::size_t calls() const;
  std::size_t in_flight() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::chrono::milliseconds stall_;
  std::uint64_t cancel_generation_ = 0;
  std::size_t calls_ = 0;
  std::size_t in_flight_ = 0;
};

/// Ollama-compatible local server (POST /api/chat, non-streaming).
class OllamaProvider : public Provider {
 public:
  OllamaProvider(std::string endpoint, std::string model) : endpoint_(std::move(endpoint)), model_(std::move(model)) {}
  std::string complete(const ProviderRequest& request) override;

  static Json request_body(const ProviderRequest& request);
  static std::string parse_response(const std::string& body);

 private:
  std::string endpoint_;
  std::string model_;
};

/// Gemini generateContent REST API. The key is read from the configured
/// environment variable at call time and never logged.
class GeminiProvider : public Provider {
 public:
  GeminiProvider(std::string endpoint, std::string model, std::string key_env)
      : endpoint_(std::move(endpoint)), model_(std::move(model)), key_env_(std::move(key_env)) {}
  std::string complete(const ProviderRequest& request) override;

  static Json request_body(const ProviderRequest& request);
  static std::string parse_response(const std::string& body);

 private:
  std::string endpoint_;
  std::string model_;
  std::string key_env_;
};

std::shared_ptr<Provider> make_provider(const ProviderSpec& spec);

/// Provider instances by name, created on first use from specs. Thread-safe.
class ProviderRegistry {
 public:
  struct Entry {
    ProviderSpec spec;
    std::shared_ptr<Provider> provider;
  };

  /// Installs a specific instance, e.g. a mock the caller keeps a handle
  /// to. Installed entries win over scenario specs of the same name.
  void install(const ProviderSpec& spec, std::shared_ptr<Provider> provider);
  /// Looks `name` up in `scenario`'s provider list, creating the adapter on
  /// first use. Throws UnknownProvider.
  Entry resolve(const std::string& name, const ScenarioConfig& scenario);
  void cancel_all();

 private:
  std::mutex mutex_;
  std::map<std::string, Entry> entries_;
  std::map<std::string, Entry> installed_;
};

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Throws std::invalid_argument on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace caris::conversation
