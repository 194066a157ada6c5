#include "caris/conversation/conversation.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <regex>
#include <set>
#include <thread>

namespace caris::conversation {

Json exchange_to_json(const ChatExchange& e) {
  Json messages = Json::array();
  for (const auto& m : e.messages) messages.push_back(Json{{"speaker", to_string(m.speaker)}, {"text", m.text}});
  Json j{{"exchange_id", e.exchange_id}, {"timestamp", e.timestamp},  {"provider", e.provider},
         {"model", e.model},             {"role_prompt", e.role_prompt}, {"messages", std::move(messages)},
         {"image", e.image ? Json(*e.image) : Json(nullptr)}};
  if (e.response) j["response"] = *e.response;
  if (e.error) j["error"] = *e.error;
  j["latency"] = e.latency;
  return j;
}

ChatExchange exchange_from_json(const Json& j) {
  ChatExchange e;
  e.exchange_id = j.at("exchange_id").get<std::string>();
  e.timestamp = j.at("timestamp").get<std::int64_t>();
  e.provider = j.at("provider").get<std::string>();
  e.model = j.at("model").get<std::string>();
  e.role_prompt = j.at("role_prompt").get<std::string>();
  for (const Json& m : j.at("messages")) {
    e.messages.push_back({parse_speaker(m.at("speaker").get<std::string>()), m.at("text").get<std::string>()});
  }
  if (j.contains("image") && !j["image"].is_null()) e.image = j["image"].get<std::string>();
  if (j.contains("response")) e.response = j["response"].get<std::string>();
  if (j.contains("error")) e.error = j["error"].get<std::string>();
  e.latency = j.at("latency").get<std::int64_t>();
  return e;
}

Conversation::Conversation(std::shared_ptr<ProviderRegistry> providers, recorder::Session* session,
                           ConversationOptions options)
    : providers_(std::move(providers)), session_(session), options_(options) {}

void Conversation::set_role(const std::string& role, std::optional<std::string> note) {
  {
    std::lock_guard lock(mutex_);
    role_ = role;
  }
  if (session_) session_->record(recorder::EventKind::Scenario, {{"action", "set_role"}, {"role", role}}, std::nullopt, note);
}

std::string Conversation::role() const {
  std::lock_guard lock(mutex_);
  return role_;
}

void Conversation::adopt_role(const std::string& role) {
  std::lock_guard lock(mutex_);
  role_ = role;
}

void Conversation::add_utterance(Speaker speaker, const std::string& text) {
  std::lock_guard lock(mutex_);
  history_.push_back({speaker, text});
}

std::vector<ChatMessage> Conversation::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

std::string Conversation::recent_transcript(std::size_t n) const {
  std::lock_guard lock(mutex_);
  std::string out;
  const std::size_t start = history_.size() > n ? history_.size() - n : 0;
  for (std::size_t i = start; i < history_.size(); ++i) {
    if (!out.empty()) out += '\n';
    out += history_[i].text;
  }
  return out;
}

namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Runs the call on a detached thread so a stalled provider can be
// abandoned; the shared state outlives whichever side finishes last.
std::string call_with_timeout(std::shared_ptr<Provider> provider, ProviderRequest request) {
  auto promise = std::make_shared<std::promise<std::string>>();
  auto future = promise->get_future();
  const auto timeout = request.timeout;
  std::thread([provider = std::move(provider), request = std::move(request), promise] {
    try {
      promise->set_value(provider->complete(request));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  }).detach();
  if (future.wait_for(timeout) != std::future_status::ready) {
    throw ProviderUnavailable("no answer within " + std::to_string(timeout.count()) + " ms");
  }
  try {
    return future.get();
  } catch (const ProviderUnavailable&) {
    throw;
  } catch (const std::exception& e) {
    throw ProviderUnavailable(e.what());
  }
}

}  // namespace

ChatExchange Conversation::complete(const CompletionRequest& request, const ScenarioConfig& scenario) {
  if (!scenario.enabled_features.llm) throw DisabledByScenario("LLM use is disabled in this scenario");
  if (blank(request.prompt)) throw EmptyPrompt("prompt is empty");
  const std::string name = request.provider.value_or(scenario.provider);
  const auto entry = providers_->resolve(name, scenario);
  if (request.image && !entry.spec.supports_images) {
    throw ImagesUnsupported("provider " + name + " does not accept images");
  }

  ChatExchange ex;
  ProviderRequest call;
  {
    std::lock_guard lock(mutex_);
    ex.exchange_id = "ex-" + std::to_string(next_exchange_++);
    ex.role_prompt = role_;
    const std::size_t keep = options_.history_window > 0 ? options_.history_window - 1 : 0;
    const std::size_t start = history_.size() > keep ? history_.size() - keep : 0;
    ex.messages.assign(history_.begin() + static_cast<std::ptrdiff_t>(start), history_.end());
    ex.messages.push_back({request.speaker, request.prompt});
  }
  ex.provider = name;
  ex.model = entry.spec.model;
  ex.timestamp = session_ ? session_->now_ms() : 0;
  call.model = entry.spec.model;
  call.role_prompt = ex.role_prompt;
  call.messages = ex.messages;
  call.image = request.image;
  call.timeout = options_.timeout;

  const auto started = std::chrono::steady_clock::now();
  try {
    ex.response = call_with_timeout(entry.provider, std::move(call));
  } catch (const ProviderUnavailable& e) {
    ex.error = e.what();
  }
  ex.latency =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();

  if (session_) {
    const auto path = session_->record_llm(exchange_to_json(ex), request.image ? &*request.image : nullptr,
                                           request.person_id, request.note);
    if (request.image) ex.image = "llm/" + path.stem().string() + ".png";
  }
  {
    std::lock_guard lock(mutex_);
    history_.push_back({request.speaker, request.prompt});
    if (ex.response) history_.push_back({Speaker::Model, *ex.response});
  }
  if (ex.error) throw ProviderUnavailable(*ex.error);
  return ex;
}

std::string Conversation::generate_suggestion(const ScenarioConfig& scenario, std::chrono::milliseconds timeout) {
  if (!scenario.enabled_features.llm) return "";
  try {
    const auto entry = providers_->resolve(scenario.provider, scenario);
    ProviderRequest call;
    call.model = entry.spec.model;
    call.role_prompt = role();
    call.messages = {{Speaker::Wizard, "Suggest one short thing the robot could say next. Conversation so far:\n" +
                                           recent_transcript()}};
    call.timeout = timeout;
    std::string line = call_with_timeout(entry.provider, std::move(call));
    if (const auto nl = line.rfind('\n'); nl != std::string::npos) line = line.substr(nl + 1);
    return line;
  } catch (const Error&) {
    return "";
  }
}

std::string render_template(const Template& t, const std::map<std::string, std::string>& vars) {
  static const std::regex placeholder(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::set<std::string> missing;
  for (const auto& v : t.required_vars) {
    if (!vars.count(v)) missing.insert(v);
  }
  std::string out;
  auto last = t.body.cbegin();
  for (std::sregex_iterator it(t.body.begin(), t.body.end(), placeholder), end; it != end; ++it) {
    const auto& m = *it;
    out.append(last, m[0].first);
    const auto found = vars.find(m[1].str());
    if (found == vars.end()) {
      missing.insert(m[1].str());
    } else {
      out += found->second;
    }
    last = m[0].second;
  }
  out.append(last, t.body.cend());
  if (!missing.empty()) {
    std::string names;
    for (const auto& n : missing) names += (names.empty() ? "" : ", ") + n;
    throw MissingVar(names);
  }
  return out;
}

std::vector<std::string> suggest_prompts(const ScenarioConfig& scenario, const std::string& recent_transcript,
                                         std::size_t limit, const std::function<std::string(const std::string&)>& generator) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  const std::string transcript = lower(recent_transcript);
  std::vector<std::string> triggered, rest;
  for (const auto& q : scenario.quick_phrases) {
    const bool hit = !transcript.empty() && std::any_of(q.triggers.begin(), q.triggers.end(), [&](const std::string& t) {
      return !t.empty() && transcript.find(lower(t)) != std::string::npos;
    });
    (hit ? triggered : rest).push_back(q.text);
  }
  std::vector<std::string> out = std::move(triggered);
  out.insert(out.end(), rest.begin(), rest.end());
  std::string generated;
  if (generator && limit > 0) generated = generator(recent_transcript);
  const std::size_t room = generated.empty() ? limit : limit - 1;
  if (out.size() > room) out.resize(room);
  if (!generated.empty()) out.push_back(generated);
  return out;
}

}  // namespace caris::conversation
