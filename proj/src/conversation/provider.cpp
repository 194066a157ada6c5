#include "caris/conversation/provider.hpp"

#include <openssl/evp.h>

#include <cstdlib>
#include <stdexcept>

#include <httplib.h>

namespace caris::conversation {

const char* to_string(Speaker s) {
  switch (s) {
    case Speaker::Wizard:
      return "wizard";
    case Speaker::User:
      return "user";
    case Speaker::Model:
      return "model";
  }
  return "?";
}

Speaker parse_speaker(const std::string& s) {
  if (s == "wizard") return Speaker::Wizard;
  if (s == "user") return Speaker::User;
  if (s == "model") return Speaker::Model;
  throw std::invalid_argument("unknown speaker '" + s + "'");
}

std::string MockProvider::complete(const ProviderRequest& request) {
  std::unique_lock lock(mutex_);
  ++calls_;
  ++in_flight_;
  const std::uint64_t generation = cancel_generation_;
  const bool cancelled = cv_.wait_for(lock, stall_, [&] { return cancel_generation_ != generation; });
  --in_flight_;
  if (cancelled) throw ProviderUnavailable("mock call cancelled");
  lock.unlock();

  std::string out;
  if (!request.role_prompt.empty()) out += "role:" + request.role_prompt + "\n";
  out += "echo:" + (request.messages.empty() ? std::string() : request.messages.back().text);
  if (request.image) out += "\nimage:" + std::to_string(request.image->size()) + " bytes";
  return out;
}

void MockProvider::cancel() {
  {
    std::lock_guard lock(mutex_);
    ++cancel_generation_;
  }
  cv_.notify_all();
}

void MockProvider::set_stall(std::chrono::milliseconds stall) {
  std::lock_guard lock(mutex_);
  stall_ = stall;
}

std::size_t MockProvider::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t MockProvider::in_flight() const {
  std::lock_guard lock(mutex_);
  return in_flight_;
}

namespace {

std::string chat_role(Speaker s) { return s == Speaker::Model ? "assistant" : "user"; }

void apply_timeouts(httplib::Client& client, std::chrono::milliseconds timeout) {
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
}

std::string post_json(const std::string& endpoint, const std::string& path, const Json& body,
                      std::chrono::milliseconds timeout, const httplib::Headers& headers = {}) {
  httplib::Client client(endpoint);
  apply_timeouts(client, timeout);
  const auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw ProviderUnavailable(endpoint + ": " + httplib::to_string(res.error()));
  if (res->status / 100 != 2) {
    throw ProviderUnavailable(endpoint + " answered HTTP " + std::to_string(res->status));
  }
  return res->body;
}

}  // namespace

Json OllamaProvider::request_body(const ProviderRequest& request) {
  Json messages = Json::array();
  if (!request.role_prompt.empty()) messages.push_back(Json{{"role", "system"}, {"content", request.role_prompt}});
  for (const auto& m : request.messages) messages.push_back(Json{{"role", chat_role(m.speaker)}, {"content", m.text}});
  if (request.image && !request.messages.empty()) messages.back()["images"] = Json::array({base64_encode(*request.image)});
  return Json{{"model", request.model}, {"messages", std::move(messages)}, {"stream", false}};
}

std::string OllamaProvider::parse_response(const std::string& body) {
  try {
    const Json j = Json::parse(body);
    if (j.contains("error")) throw ProviderUnavailable(j["error"].dump());
    return j.at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    throw ProviderUnavailable(std::string("unexpected reply: ") + e.what());
  }
}

std::string OllamaProvider::complete(const ProviderRequest& request) {
  ProviderRequest r = request;
  if (r.model.empty()) r.model = model_;
  return parse_response(post_json(endpoint_, "/api/chat", request_body(r), request.timeout));
}

Json GeminiProvider::request_body(const ProviderRequest& request) {
  Json contents = Json::array();
  for (const auto& m : request.messages) {
    contents.push_back(Json{{"role", m.speaker == Speaker::Model ? "model" : "user"},
                            {"parts", Json::array({Json{{"text", m.text}}})}});
  }
  if (request.image && !contents.empty()) {
    contents.back()["parts"].push_back(
        Json{{"inline_data", {{"mime_type", "image/png"}, {"data", base64_encode(*request.image)}}}});
  }
  Json body;
  if (!request.role_prompt.empty()) {
    body["system_instruction"] = Json{{"parts", Json::array({Json{{"text", request.role_prompt}}})}};
  }
  body["contents"] = std::move(contents);
  return body;
}

std::string GeminiProvider::parse_response(const std::string& body) {
  try {
    const Json j = Json::parse(body);
    if (j.contains("error")) throw ProviderUnavailable(j["error"].value("message", std::string("error")));
    std::string text;
    for (const Json& part : j.at("candidates").at(0).at("content").at("parts")) text += part.value("text", std::string());
    return text;
  } catch (const Json::exception& e) {
    throw ProviderUnavailable(std::string("unexpected reply: ") + e.what());
  }
}

std::string GeminiProvider::complete(const ProviderRequest& request) {
  const char* key = key_env_.empty() ? nullptr : std::getenv(key_env_.c_str());
  if (!key || !*key) throw ProviderUnavailable("credential variable " + key_env_ + " is not set");
  const std::string model = request.model.empty() ? model_ : request.model;
  return parse_response(post_json(endpoint_, "/v1beta/models/" + model + ":generateContent", request_body(request),
                                  request.timeout, {{"x-goog-api-key", key}}));
}

std::shared_ptr<Provider> make_provider(const ProviderSpec& spec) {
  switch (spec.kind) {
    case ProviderKind::Mock:
      return std::make_shared<MockProvider>(std::chrono::milliseconds(spec.stall_ms));
    case ProviderKind::Local:
      return std::make_shared<OllamaProvider>(spec.endpoint, spec.model);
    case ProviderKind::Cloud:
      return std::make_shared<GeminiProvider>(spec.endpoint, spec.model, spec.credentials_env);
  }
  throw UnknownProvider(spec.name);
}

void ProviderRegistry::install(const ProviderSpec& spec, std::shared_ptr<Provider> provider) {
  std::lock_guard lock(mutex_);
  installed_[spec.name] = {spec, std::move(provider)};
}

ProviderRegistry::Entry ProviderRegistry::resolve(const std::string& name, const ScenarioConfig& scenario) {
  std::lock_guard lock(mutex_);
  if (const auto pinned = installed_.find(name); pinned != installed_.end()) return pinned->second;
  const auto spec = scenario.find_provider(name);
  auto it = entries_.find(name);
  if (it != entries_.end()) {
    // A hot-swapped scenario may redefine the provider; rebuild if so.
    if (!spec || provider_to_json(*spec) == provider_to_json(it->second.spec)) return it->second;
  }
  if (!spec) throw UnknownProvider("no provider named '" + name + "'");
  Entry e{*spec, make_provider(*spec)};
  entries_[name] = e;
  return e;
}

void ProviderRegistry::cancel_all() {
  std::lock_guard lock(mutex_);
  for (auto& [name, e] : entries_) e.provider->cancel();
  for (auto& [name, e] : installed_) e.provider->cancel();
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw std::invalid_argument("malformed base64");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace caris::conversation
