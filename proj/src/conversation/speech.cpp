#include "caris/conversation/speech.hpp"

#include <algorithm>
#include <cctype>

namespace caris::conversation {

namespace {

constexpr std::string_view kMockMagic = "MOCKSTT\n";

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::vector<std::uint8_t> make_mock_audio(const std::string& text) {
  std::vector<std::uint8_t> out(kMockMagic.begin(), kMockMagic.end());
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

std::string MockStt::transcribe(const std::vector<std::uint8_t>& audio) {
  if (audio.size() < kMockMagic.size() || !std::equal(kMockMagic.begin(), kMockMagic.end(), audio.begin())) {
    throw AdapterUnavailable("mock STT only understands its own fixtures");
  }
  return std::string(audio.begin() + static_cast<std::ptrdiff_t>(kMockMagic.size()), audio.end());
}

std::uint64_t BridgeTts::speak(const std::string& text) {
  auto client = client_ ? client_() : nullptr;
  if (!client || !client->is_open()) throw AdapterUnavailable("robot is not connected");
  try {
    return client->say(text).frame_seq;
  } catch (const bridge::Disconnected& e) {
    throw AdapterUnavailable(e.what());
  }
}

Utterance Speech::speak(const std::string& text, const Features& features, std::optional<std::int64_t> person_id,
                        std::optional<std::string> note) {
  if (!features.tts) throw DisabledByScenario("text-to-speech is disabled in this scenario");
  if (blank(text)) throw EmptyUtterance("nothing to say");
  if (!tts_) throw AdapterUnavailable("no TTS adapter configured");
  std::lock_guard lock(speak_mutex_);
  const std::uint64_t frame = tts_->speak(text);
  Utterance u{text, 0};
  if (session_) u.seq = session_->record(recorder::EventKind::Tts, {{"text", text}, {"frame_seq", frame}}, person_id, note);
  std::lock_guard last(last_mutex_);
  last_ = text;
  return u;
}

Utterance Speech::transcribe(const std::vector<std::uint8_t>& audio, const Features& features,
                             std::optional<std::int64_t> person_id, std::optional<std::string> note) {
  if (!features.stt) throw DisabledByScenario("speech-to-text is disabled in this scenario");
  if (!stt_) throw AdapterUnavailable("no STT adapter configured");
  Utterance u{stt_->transcribe(audio), 0};
  if (session_) {
    u.seq = session_->record(recorder::EventKind::Stt, {{"text", u.text}, {"audio_bytes", audio.size()}}, person_id, note);
  }
  return u;
}

std::optional<std::string> Speech::last_utterance() const {
  std::lock_guard lock(last_mutex_);
  return last_;
}

}  // namespace caris::conversation
