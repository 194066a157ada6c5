#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "caris/error.hpp"

namespace caris::gateway {

CARIS_DEFINE_ERROR(ListenError, Error);

struct HttpRequest {
  std::string method;
  std::string path;  // without the query string
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lowercase names
  std::string body;

  std::optional<std::string> query_param(const std::string& key) const;
  std::string header(const std::string& name) const;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

/// Raw byte sink for endpoints that keep the connection open (MJPEG).
class StreamWriter {
 public:
  virtual ~StreamWriter() = default;
  /// False once the peer is gone or the server is stopping.
  virtual bool write(std::string_view bytes) = 0;
  virtual bool open() const = 0;
};

class WsSender {
 public:
  virtual ~WsSender() = default;
  virtual bool send_text(const std::string& text) = 0;
  virtual bool open() const = 0;
};

struct Routes {
  std::function<HttpResponse(const HttpRequest&)> handle;
  /// Streaming GET endpoints by path. The handler writes its own status
  /// line and headers and returns when it is done; the connection is closed.
  std::map<std::string, std::function<void(const HttpRequest&, StreamWriter&)>> streams;
  /// WebSocket endpoints by path.
  std::map<std::string, std::function<void(const HttpRequest&, WsSender&)>> websockets;
};

/// Splits "host:port", ":port" or "port". Throws ListenError.
std::pair<std::string, unsigned short> parse_listen(const std::string& addr);

/// Blocking-I/O HTTP/1.1 server with one thread per connection.
///
/// A slow handler only ever holds its own connection, so a request waiting
/// on a language model cannot delay teleop traffic arriving on another
/// connection. stop() wakes every blocked connection and waits for them.
class HttpServer {
 public:
  HttpServer(const std::string& address, unsigned short port, Routes routes);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  void start();
  void stop();
  unsigned short port() const { return port_; }
  bool stopping() const { return stopping_.load(); }
  std::size_t connections() const;

  static constexpr std::size_t kBodyLimit = 32u << 20;

 private:
  void accept_loop();
  void serve(int fd, std::uint64_t id);

  Routes routes_;
  int listen_fd_ = -1;
  unsigned short port_ = 0;
  std::thread acceptor_;
  std::atomic<bool> started_{false};
  std::atomic<bool> stopping_{false};
  mutable std::mutex mutex_;
  std::condition_variable drained_;
  std::map<std::uint64_t, int> live_;
  std::uint64_t next_id_ = 1;
};

HttpResponse json_response(int status, const std::string& body);
HttpResponse error_response(int status, const std::string& message);
const char* status_text(int status);

}  // namespace caris::gateway
