#include "caris/gateway/http_server.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "caris/json.hpp"

namespace caris::gateway {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

std::optional<std::string> HttpRequest::query_param(const std::string& key) const {
  const auto it = query.find(key);
  if (it == query.end()) return std::nullopt;
  return it->second;
}

std::string HttpRequest::header(const std::string& name) const {
  const auto it = headers.find(name);
  return it == headers.end() ? std::string() : it->second;
}

const char* status_text(int status) {
  return http::obsolete_reason(static_cast<http::status>(status)).data();
}

HttpResponse json_response(int status, const std::string& body) { return HttpResponse{status, "application/json", body, {}}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, Json{{"status", status}, {"error", message}}.dump());
}

std::pair<std::string, unsigned short> parse_listen(const std::string& addr) {
  std::string host = "127.0.0.1";
  std::string port = addr;
  if (const auto colon = addr.rfind(':'); colon != std::string::npos) {
    host = addr.substr(0, colon);
    port = addr.substr(colon + 1);
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    if (host.empty()) host = "0.0.0.0";
  }
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::out_of_range(port);
    return {host, static_cast<unsigned short>(p)};
  } catch (const std::exception&) {
    throw ListenError("bad listen address '" + addr + "', expected host:port");
  }
}

namespace {

int hex(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string url_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%' && i + 2 < s.size() && hex(s[i + 1]) >= 0 && hex(s[i + 2]) >= 0) {
      out += static_cast<char>(hex(s[i + 1]) * 16 + hex(s[i + 2]));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

HttpRequest convert(const http::request<http::string_body>& req) {
  HttpRequest r;
  r.method = std::string(req.method_string());
  const std::string_view target(req.target().data(), req.target().size());
  const auto q = target.find('?');
  r.path = url_decode(target.substr(0, q));
  if (q != std::string_view::npos) {
    std::string_view rest = target.substr(q + 1);
    while (!rest.empty()) {
      const auto amp = rest.find('&');
      const std::string_view pair = rest.substr(0, amp);
      const auto eq = pair.find('=');
      if (!pair.empty()) {
        r.query[url_decode(pair.substr(0, eq))] = eq == std::string_view::npos ? "" : url_decode(pair.substr(eq + 1));
      }
      if (amp == std::string_view::npos) break;
      rest.remove_prefix(amp + 1);
    }
  }
  for (const auto& field : req) {
    std::string name(field.name_string());
    for (char& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    r.headers[name] = std::string(field.value());
  }
  r.body = req.body();
  return r;
}

class SocketStream : public StreamWriter {
 public:
  SocketStream(tcp::socket& socket, const HttpServer& server) : socket_(socket), server_(server) {}
  bool write(std::string_view bytes) override {
    if (!open()) return false;
    beast::error_code ec;
    asio::write(socket_, asio::buffer(bytes.data(), bytes.size()), ec);
    if (ec) failed_ = true;
    return !failed_;
  }
  bool open() const override { return !failed_ && !server_.stopping(); }

 private:
  tcp::socket& socket_;
  const HttpServer& server_;
  bool failed_ = false;
};

class WsStream : public WsSender {
 public:
  WsStream(websocket::stream<tcp::socket&>& ws, const HttpServer& server) : ws_(ws), server_(server) {}
  bool send_text(const std::string& text) override {
    if (!open()) return false;
    beast::error_code ec;
    ws_.text(true);
    ws_.write(asio::buffer(text), ec);
    if (ec) failed_ = true;
    return !failed_;
  }
  bool open() const override { return !failed_ && !server_.stopping(); }

 private:
  websocket::stream<tcp::socket&>& ws_;
  const HttpServer& server_;
  bool failed_ = false;
};

}  // namespace

HttpServer::HttpServer(const std::string& address, unsigned short port, Routes routes) : routes_(std::move(routes)) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(address.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw ListenError("cannot resolve " + address + ": " + ::gai_strerror(rc));
  }
  std::string failure = "no usable address";
  for (addrinfo* ai = found; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    failure = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (listen_fd_ < 0) throw ListenError("cannot listen on " + address + ":" + service + ": " + failure);
  sockaddr_storage bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                                            : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
}

HttpServer::~HttpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void HttpServer::start() {
  if (started_.exchange(true)) return;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void HttpServer::stop() {
  if (stopping_.exchange(true)) return;
  // shutdown() on the listening socket wakes the blocked accept().
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  std::unique_lock lock(mutex_);
  for (const auto& [id, fd] : live_) ::shutdown(fd, SHUT_RDWR);
  drained_.wait(lock, [this] { return live_.empty(); });
}

std::size_t HttpServer::connections() const {
  std::lock_guard lock(mutex_);
  return live_.size();
}

void HttpServer::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      if (stopping_) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      continue;
    }
    std::lock_guard lock(mutex_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    const std::uint64_t id = next_id_++;
    live_[id] = fd;
    std::thread([this, fd, id] { serve(fd, id); }).detach();
  }
}

void HttpServer::serve(int fd, std::uint64_t id) {
  std::unique_lock<std::mutex> done;
  {
    asio::io_context io;
    tcp::socket socket(io);
    sockaddr_storage local{};
    socklen_t len = sizeof local;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&local), &len);
    beast::error_code ec;
    socket.assign(local.ss_family == AF_INET6 ? tcp::v6() : tcp::v4(), fd, ec);
    socket.set_option(tcp::no_delay(true), ec);
    beast::flat_buffer buffer;

    while (!ec && !stopping_) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(kBodyLimit);
      http::read(socket, buffer, parser, ec);
      if (ec) break;
      auto req = parser.release();
      const HttpRequest request = convert(req);

      if (websocket::is_upgrade(req)) {
        const auto route = routes_.websockets.find(request.path);
        if (route != routes_.websockets.end()) {
          websocket::stream<tcp::socket&> ws(socket);
          ws.accept(req, ec);
          if (!ec) {
            WsStream sender(ws, *this);
            try {
              route->second(request, sender);
            } catch (const std::exception&) {
            }
            ws.close(websocket::close_code::going_away, ec);
          }
          break;
        }
      }
      if (req.method() == http::verb::get) {
        const auto route = routes_.streams.find(request.path);
        if (route != routes_.streams.end()) {
          SocketStream writer(socket, *this);
          try {
            route->second(request, writer);
          } catch (const std::exception&) {
          }
          break;
        }
      }

      HttpResponse out;
      try {
        out = routes_.handle ? routes_.handle(request) : error_response(404, "no such endpoint");
      } catch (const std::exception& e) {
        out = error_response(500, e.what());
      }
      http::response<http::string_body> res{static_cast<http::status>(out.status), req.version()};
      res.set(http::field::server, "caris");
      res.set(http::field::content_type, out.content_type);
      res.set(http::field::cache_control, "no-store");
      for (const auto& [name, value] : out.headers) res.set(name, value);
      res.body() = std::move(out.body);
      res.keep_alive(req.keep_alive() && !stopping_);
      res.prepare_payload();
      http::write(socket, res, ec);
      if (!res.keep_alive()) break;
    }

    // Drop the descriptor from the map and close it under one lock so stop()
    // never shuts down a recycled fd number.
    done = std::unique_lock(mutex_);
    live_.erase(id);
    socket.shutdown(tcp::socket::shutdown_both, ec);
    socket.close(ec);
  }
  // stop() may destroy the server as soon as the lock is released, which
  // this defers to the very end of the thread.
  std::notify_all_at_thread_exit(drained_, std::move(done));
}

}  // namespace caris::gateway
