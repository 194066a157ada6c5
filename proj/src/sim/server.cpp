#include "caris/sim/server.hpp"

#include <atomic>
#include <chrono>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "caris/bridge/message.hpp"

namespace caris::sim {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Frame = std::shared_ptr<const std::string>;

namespace detail {

class Session;

}  // namespace detail

using detail::Session;

struct SimServer::Impl {
  Options options;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::thread io_thread;
  std::thread sim_thread;
  std::atomic<bool> running{false};
  unsigned short bound_port = 0;

  mutable std::mutex sim_mutex;
  Simulator simulator;

  mutable std::mutex log_mutex;
  std::vector<std::string> spoken;
  std::function<void(const TwistCommand&)> command_observer;
  std::function<void(const std::string&)> speech_observer;
  std::atomic<std::uint64_t> rejected{0};

  // I/O thread only.
  std::vector<std::weak_ptr<Session>> sessions;
  std::atomic<std::size_t> live_sessions{0};

  Impl(World world, SimParams params, Options opts) : options(std::move(opts)), simulator(std::move(world), params) {
    simulator.on_scan = [this](const bridge::LaserScan& scan) {
      broadcast(options.topics.scan,
                bridge::encode_message(bridge::BridgeMessage::publish(options.topics.scan, bridge::scan_to_msg(scan))));
    };
    simulator.on_odometry = [this](const bridge::Odometry& odom) {
      broadcast(options.topics.odom, bridge::encode_message(bridge::BridgeMessage::publish(
                                         options.topics.odom, bridge::odometry_to_msg(odom))));
    };
  }

  void broadcast(const std::string& topic, std::string frame);
  void accept();
  void handle_frame(const std::shared_ptr<Session>& session, const std::string& text);

  void advance(std::uint64_t steps) {
    std::lock_guard lock(sim_mutex);
    simulator.advance(steps);
  }

  void run_realtime() {
    const auto period = std::chrono::duration<double>(simulator.params().dt);
    auto next = std::chrono::steady_clock::now();
    while (running) {
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      std::this_thread::sleep_until(next);
      advance(1);
    }
  }
};

namespace detail {

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, SimServer::Impl* server) : ws_(std::move(socket)), server_(server) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->accepted_ = true;
      ++self->server_->live_sessions;
      self->read();
    });
  }

  void send(const Frame& frame) {
    if (!accepted_ || closed_) return;
    queue_.push_back(frame);
    if (queue_.size() == 1) write();
  }

  bool subscribed(const std::string& topic) const { return topics_.count(topic) != 0; }
  void subscribe(const std::string& topic) { topics_.insert(topic); }
  void unsubscribe(const std::string& topic) { topics_.erase(topic); }

  void close() {
    if (closed_ || !accepted_) return;
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->finish();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->server_->handle_frame(self, text);
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->queue_.pop_front();
      if (ec) {
        self->finish();
        return;
      }
      if (!self->queue_.empty()) self->write();
    });
  }

  void finish() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    if (accepted_) --server_->live_sessions;
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  SimServer::Impl* server_;
  std::deque<Frame> queue_;
  std::set<std::string> topics_;
  bool accepted_ = false;
  bool closed_ = false;
};

}  // namespace detail

void SimServer::Impl::broadcast(const std::string& topic, std::string frame) {
  auto shared = std::make_shared<const std::string>(std::move(frame));
  asio::post(io, [this, topic, shared] {
    for (const auto& weak : sessions) {
      if (auto session = weak.lock(); session && session->subscribed(topic)) session->send(shared);
    }
  });
}

void SimServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    socket.set_option(tcp::no_delay(true));
    auto session = std::make_shared<Session>(std::move(socket), this);
    std::erase_if(sessions, [](const std::weak_ptr<Session>& w) { return w.expired(); });
    sessions.push_back(session);
    session->start();
    accept();
  });
}

void SimServer::Impl::handle_frame(const std::shared_ptr<Session>& session, const std::string& text) {
  bridge::BridgeMessage message;
  try {
    message = bridge::decode_message(text);
  } catch (const Error&) {
    ++rejected;
    return;
  }
  using bridge::Op;
  switch (message.op) {
    case Op::Subscribe:
      session->subscribe(message.topic);
      return;
    case Op::Unsubscribe:
      session->unsubscribe(message.topic);
      return;
    case Op::Advertise:
    case Op::Unadvertise:
      return;
    case Op::Publish:
      break;
  }
  try {
    if (message.topic == options.topics.cmd_vel) {
      const TwistCommand twist = bridge::twist_from_msg(*message.msg);
      {
        std::lock_guard lock(sim_mutex);
        simulator.set_command(twist);
      }
      std::function<void(const TwistCommand&)> observer;
      {
        std::lock_guard lock(log_mutex);
        observer = command_observer;
      }
      if (observer) observer(twist);
    } else if (message.topic == options.topics.tts) {
      std::string utterance = bridge::speech_from_msg(*message.msg);
      std::function<void(const std::string&)> observer;
      {
        std::lock_guard lock(log_mutex);
        spoken.push_back(utterance);
        observer = speech_observer;
      }
      if (observer) observer(utterance);
    } else if (message.topic == kStepTopic && !options.realtime) {
      const auto steps = message.msg->value("steps", std::uint64_t{1});
      advance(steps);
    }
  } catch (const Error&) {
    ++rejected;
  } catch (const Json::exception&) {
    ++rejected;
  }
}

SimServer::SimServer(World world, SimParams params, Options options)
    : impl_(std::make_shared<Impl>(std::move(world), params, std::move(options))) {
  try {
    const auto address = asio::ip::make_address(impl_->options.address);
    const tcp::endpoint endpoint(address, impl_->options.port);
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
    impl_->bound_port = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw BindError(impl_->options.address + ":" + std::to_string(impl_->options.port) + ": " + e.what());
  }
}

SimServer::~SimServer() { stop(); }

void SimServer::start() {
  if (impl_->running.exchange(true)) return;
  impl_->accept();
  impl_->io_thread = std::thread([impl = impl_.get()] { impl->io.run(); });
  if (impl_->options.realtime) {
    impl_->sim_thread = std::thread([impl = impl_.get()] { impl->run_realtime(); });
  }
}

void SimServer::stop() {
  if (!impl_->running.exchange(false)) {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
    return;
  }
  if (impl_->sim_thread.joinable()) impl_->sim_thread.join();
  asio::post(impl_->io, [impl = impl_.get()] {
    beast::error_code ignored;
    impl->acceptor.close(ignored);
    for (const auto& weak : impl->sessions) {
      if (auto session = weak.lock()) session->close();
    }
    auto deadline = std::make_shared<asio::steady_timer>(impl->io, std::chrono::milliseconds(200));
    deadline->async_wait([impl, deadline](beast::error_code) { impl->io.stop(); });
  });
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

unsigned short SimServer::port() const { return impl_->bound_port; }

std::string SimServer::url() const { return "ws://" + impl_->options.address + ":" + std::to_string(port()); }

void SimServer::advance(std::uint64_t steps) { impl_->advance(steps); }

SimState SimServer::state() const {
  std::lock_guard lock(impl_->sim_mutex);
  return impl_->simulator.state();
}

std::vector<std::string> SimServer::spoken() const {
  std::lock_guard lock(impl_->log_mutex);
  return impl_->spoken;
}

std::size_t SimServer::client_count() const { return impl_->live_sessions; }

std::uint64_t SimServer::frames_rejected() const { return impl_->rejected; }

void SimServer::set_command_observer(std::function<void(const TwistCommand&)> observer) {
  std::lock_guard lock(impl_->log_mutex);
  impl_->command_observer = std::move(observer);
}

void SimServer::set_speech_observer(std::function<void(const std::string&)> observer) {
  std::lock_guard lock(impl_->log_mutex);
  impl_->speech_observer = std::move(observer);
}

}  // namespace caris::sim
