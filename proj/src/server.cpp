#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>

#include "hwdbg/server.hpp"

namespace hwdbg {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Session& session)
      : ws_(std::move(socket)), session_(session) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      std::weak_ptr<Connection> weak = self;
      self->subscription_ = self->session_.subscribe([weak](const Json& event) {
        if (auto c = weak.lock()) c->send(event.dump());
      });
      self->read();
    });
  }

  void close() {
    finish();
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, size_t) {
      if (ec) {
        self->finish();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      std::weak_ptr<Connection> weak = self;
      self->session_.handle(text, [weak](const Json& response) {
        if (auto c = weak.lock()) c->send(response.dump());
      });
      self->read();
    });
  }

  void send(std::string text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      if (self->closed_) return;
      self->outbox_.push_back(std::move(text));
      if (self->outbox_.size() == 1) self->write();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, size_t) {
                      if (ec) {
                        self->finish();
                        return;
                      }
                      self->outbox_.pop_front();
                      if (!self->outbox_.empty()) self->write();
                    });
  }

  void finish() {
    if (closed_) return;
    closed_ = true;
    outbox_.clear();
    if (subscription_ >= 0) session_.unsubscribe(subscription_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  Session& session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  int subscription_ = -1;
  bool closed_ = false;
};

}  // namespace

struct Server::Impl {
  Session& session;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread thread;
  std::vector<std::weak_ptr<Connection>> connections;

  explicit Impl(Session& s) : session(s) {}

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto c = std::make_shared<Connection>(std::move(socket), session);
      connections.push_back(c);
      c->start();
      accept();
    });
  }
};

Server::Server(Session& session, const std::string& address, uint16_t port)
    : impl_(std::make_unique<Impl>(session)) {
  beast::error_code ec;
  const auto addr = net::ip::make_address(address, ec);
  if (ec) throw Error("invalid bind address '" + address + "'");
  const tcp::endpoint ep(addr, port);
  impl_->acceptor.open(ep.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(ep, ec);
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error("cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());
  }
}

Server::~Server() { stop(); }

uint16_t Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::start() {
  if (impl_->thread.joinable()) return;
  impl_->accept();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

void Server::stop() {
  if (!impl_->thread.joinable()) return;
  net::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    for (auto& w : impl_->connections) {
      if (auto c = w.lock()) c->close();
    }
    impl_->ioc.stop();
  });
  impl_->thread.join();
}

// ---------------------------------------------------------------------------
// Client

struct Client::Impl {
  net::io_context ioc;
  websocket::stream<beast::tcp_stream> ws{ioc};
  beast::flat_buffer buffer;
  std::deque<std::string> outbox;
  std::thread thread;

  mutable std::mutex mutex;
  std::condition_variable cv;
  std::vector<Json> received;
  size_t next_event = 0;  // index into received
  bool closed = false;
  uint64_t next_token = 1;

  void read() {
    ws.async_read(buffer, [this](beast::error_code ec, size_t) {
      if (ec) {
        std::lock_guard lock(mutex);
        closed = true;
        cv.notify_all();
        return;
      }
      Json msg;
      try {
        msg = Json::parse(beast::buffers_to_string(buffer.data()));
      } catch (const Json::exception&) {
        msg = Json{{"type", "unparsable"}};
      }
      buffer.consume(buffer.size());
      {
        std::lock_guard lock(mutex);
        received.push_back(std::move(msg));
      }
      cv.notify_all();
      read();
    });
  }

  void write() {
    ws.text(true);
    ws.async_write(net::buffer(outbox.front()), [this](beast::error_code ec, size_t) {
      if (ec) return;
      outbox.pop_front();
      if (!outbox.empty()) write();
    });
  }

  void send(std::string text) {
    net::post(ioc, [this, text = std::move(text)]() mutable {
      outbox.push_back(std::move(text));
      if (outbox.size() == 1) write();
    });
  }
};

Client::Client(const std::string& host, uint16_t port) : impl_(std::make_unique<Impl>()) {
  try {
    tcp::resolver resolver(impl_->ioc);
    auto results = resolver.resolve(host, std::to_string(port));
    beast::get_lowest_layer(impl_->ws).connect(results);
    impl_->ws.handshake(host + ":" + std::to_string(port), "/");
  } catch (const beast::system_error& e) {
    throw Error("cannot connect to " + host + ":" + std::to_string(port) + ": " + e.code().message());
  }
  impl_->read();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

Client::~Client() {
  net::post(impl_->ioc, [this] {
    beast::error_code ec;
    beast::get_lowest_layer(impl_->ws).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(impl_->ws).socket().close(ec);
  });
  impl_->thread.join();
}

void Client::send_raw(const std::string& text) { impl_->send(text); }

Json Client::request(const std::string& command, Json payload, double timeout_s) {
  std::string token;
  {
    std::lock_guard lock(impl_->mutex);
    token = "t" + std::to_string(impl_->next_token++);
  }
  impl_->send(protocol::request(token, command, std::move(payload)).dump());
  auto r = wait_response(token, timeout_s);
  if (!r) throw Error("no response to '" + command + "' within the timeout");
  return *r;
}

std::optional<Json> Client::wait_response(const Json& token, double timeout_s) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  std::unique_lock lock(impl_->mutex);
  size_t scanned = 0;
  for (;;) {
    for (; scanned < impl_->received.size(); ++scanned) {
      const Json& m = impl_->received[scanned];
      if (m.value("type", "") == "response" && m.contains("token") && m["token"] == token) return m;
    }
    if (impl_->closed) return std::nullopt;
    if (impl_->cv.wait_until(lock, deadline) == std::cv_status::timeout &&
        scanned == impl_->received.size()) {
      return std::nullopt;
    }
  }
}

std::optional<Json> Client::next_event(double timeout_s) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  std::unique_lock lock(impl_->mutex);
  for (;;) {
    for (; impl_->next_event < impl_->received.size(); ++impl_->next_event) {
      const Json& m = impl_->received[impl_->next_event];
      if (m.value("type", "") == "event") return impl_->received[impl_->next_event++];
    }
    if (impl_->closed) return std::nullopt;
    if (impl_->cv.wait_until(lock, deadline) == std::cv_status::timeout &&
        impl_->next_event == impl_->received.size()) {
      return std::nullopt;
    }
  }
}

std::vector<Json> Client::received() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->received;
}

}  // namespace hwdbg
