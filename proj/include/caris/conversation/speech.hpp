#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "caris/bridge/client.hpp"
#include "caris/conversation/scenario.hpp"
#include "caris/error.hpp"
#include "caris/recorder/recorder.hpp"

namespace caris::conversation {

CARIS_DEFINE_ERROR(AdapterUnavailable, Error);
CARIS_DEFINE_ERROR(EmptyUtterance, Error);

class SttAdapter {
 public:
  virtual ~SttAdapter() = default;
  virtual std::string transcribe(const std::vector<std::uint8_t>& audio) = 0;
};

/// Accepts fixtures built by make_mock_audio and returns the text they embed.
class MockStt : public SttAdapter {
 public:
  std::string transcribe(const std::vector<std::uint8_t>& audio) override;
};

std::vector<std::uint8_t> make_mock_audio(const std::string& text);

class TtsAdapter {
 public:
  virtual ~TtsAdapter() = default;
  /// Returns the outbound frame sequence number of the utterance.
  virtual std::uint64_t speak(const std::string& text) = 0;
};

/// Speaks through the robot: one /tts publish per call. The getter returns
/// the live client or null while the robot is disconnected.
class BridgeTts : public TtsAdapter {
 public:
  using ClientGetter = std::function<std::shared_ptr<bridge::BridgeClient>()>;
  explicit BridgeTts(ClientGetter client) : client_(std::move(client)) {}
  std::uint64_t speak(const std::string& text) override;

 private:
  ClientGetter client_;
};

struct Utterance {
  std::string text;
  std::uint64_t seq = 0;  // recorder sequence, 0 without a session
};

/// Scenario-gated speech in and out. Each successful call records exactly
/// one tts or stt event; speak() calls are serialized so publish order and
/// log order agree.
class Speech {
 public:
  Speech(std::shared_ptr<SttAdapter> stt, std::shared_ptr<TtsAdapter> tts, recorder::Session* session)
      : stt_(std::move(stt)), tts_(std::move(tts)), session_(session) {}

  /// Throws DisabledByScenario, EmptyUtterance or AdapterUnavailable.
  Utterance speak(const std::string& text, const Features& features,
                  std::optional<std::int64_t> person_id = std::nullopt,
                  std::optional<std::string> note = std::nullopt);
  Utterance transcribe(const std::vector<std::uint8_t>& audio, const Features& features,
                       std::optional<std::int64_t> person_id = std::nullopt,
                       std::optional<std::string> note = std::nullopt);

  std::optional<std::string> last_utterance() const;

 private:
  std::shared_ptr<SttAdapter> stt_;
  std::shared_ptr<TtsAdapter> tts_;
  recorder::Session* session_;
  std::mutex speak_mutex_;
  mutable std::mutex last_mutex_;
  std::optional<std::string> last_;
};

}  // namespace caris::conversation
