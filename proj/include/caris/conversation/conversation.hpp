#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "caris/conversation/provider.hpp"
#include "caris/conversation/scenario.hpp"
#include "caris/error.hpp"
#include "caris/json.hpp"
#include "caris/recorder/recorder.hpp"

namespace caris::conversation {

CARIS_DEFINE_ERROR(ImagesUnsupported, Error);
CARIS_DEFINE_ERROR(EmptyPrompt, Error);
CARIS_DEFINE_ERROR(MissingVar, Error);
CARIS_DEFINE_ERROR(UnknownTemplate, Error);

struct ChatExchange {
  std::string exchange_id;
  std::int64_t timestamp = 0;  // ms, session clock
  std::string provider;
  std::string model;
  std::string role_prompt;
  std::vector<ChatMessage> messages;
  std::optional<std::string> image;     // path of the stored PNG, relative to the session
  std::optional<std::string> response;  // present iff the provider call succeeded
  std::optional<std::string> error;
  std::int64_t latency = 0;  // ms

  bool operator==(const ChatExchange&) const = default;
};

Json exchange_to_json(const ChatExchange& e);
ChatExchange exchange_from_json(const Json& j);

struct CompletionRequest {
  std::optional<std::string> provider;  // defaults to the scenario's
  std::string prompt;
  Speaker speaker = Speaker::Wizard;
  std::optional<std::vector<std::uint8_t>> image;  // PNG
  std::optional<std::int64_t> person_id;
  std::optional<std::string> note;
};

struct ConversationOptions {
  std::size_t history_window = 20;
  std::chrono::milliseconds timeout{30000};
};

/// One running conversation: role, message history, provider calls.
///
/// Provider calls run on their own thread and are abandoned after the
/// timeout, so a stalled provider costs the caller at most `timeout`.
/// Concurrent complete() calls are allowed; history updates are serialized.
class Conversation {
 public:
  Conversation(std::shared_ptr<ProviderRegistry> providers, recorder::Session* session,
               ConversationOptions options = {});

  /// Empty text clears the role. Logged as a scenario event when a session
  /// is attached.
  void set_role(const std::string& role, std::optional<std::string> note = std::nullopt);
  std::string role() const;
  /// Sets the role without logging it, for callers that already record the
  /// change in another event (a scenario switch).
  void adopt_role(const std::string& role);

  /// Throws DisabledByScenario, EmptyPrompt, UnknownProvider or
  /// ImagesUnsupported before any provider is contacted; those produce no
  /// exchange. Once the provider is called, exactly one exchange is
  /// recorded; a failed call records its error and then throws
  /// ProviderUnavailable.
  ChatExchange complete(const CompletionRequest& request, const ScenarioConfig& scenario);

  /// One suggestion from the scenario's provider, or "" when it fails or
  /// takes longer than `timeout`. Not recorded: nothing is said or sent.
  std::string generate_suggestion(const ScenarioConfig& scenario, std::chrono::milliseconds timeout);

  /// Adds a line the robot heard (e.g. a transcript) without calling a model.
  void add_utterance(Speaker speaker, const std::string& text);
  std::vector<ChatMessage> history() const;
  /// Concatenated text of the last `n` messages, oldest first.
  std::string recent_transcript(std::size_t n = 6) const;

 private:
  std::shared_ptr<ProviderRegistry> providers_;
  recorder::Session* session_;
  ConversationOptions options_;
  mutable std::mutex mutex_;
  std::string role_;
  std::vector<ChatMessage> history_;
  std::uint64_t next_exchange_ = 1;
};

/// Substitutes "{name}" placeholders. Extra vars are ignored; throws
/// MissingVar naming every unbound required or referenced variable.
std::string render_template(const Template& t, const std::map<std::string, std::string>& vars);

/// Quick phrases whose triggers occur in the transcript (lowercase
/// substring match) first, then the rest, in configured order, at most
/// `limit`. With a generator, its non-empty output takes the last slot.
std::vector<std::string> suggest_prompts(const ScenarioConfig& scenario, const std::string& recent_transcript,
                                         std::size_t limit = 5,
                                         const std::function<std::string(const std::string&)>& generator = {});

}  // namespace caris::conversation
