#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "hwdbg/runtime.hpp"

namespace hwdbg {

using Json = nlohmann::json;

inline constexpr uint16_t kDefaultPort = 8888;

// Port from HGDB_PORT, else kDefaultPort.
uint16_t default_port();

namespace protocol {

// Decimal string plus width; "x" when unknown, "unavailable" when absent.
Json value(const std::optional<Value>& v);
Json frame(const FrameSnapshot& f);
Json stop(const StopEvent& s);
Json variables(const std::vector<VarNode>& nodes);

Json request(const std::string& token, const std::string& command, Json payload = Json::object());
Json success(const Json& token, const std::string& command, Json payload = Json::object());
Json failure(const Json& token, const std::string& command, const std::string& reason,
             const std::string& message);
Json event(const std::string& name, Json payload = Json::object());

const std::vector<std::string>& commands();

}  // namespace protocol

// A debugging session: one backend, its symbol table, the debugger core and
// the thread that drives the simulation. Requests may arrive from any thread.
class Session {
 public:
  using Reply = std::function<void(const Json&)>;
  using Subscriber = std::function<void(const Json&)>;

  // `sources` maps symbol-table file names to their text for `info file`.
  // Without an explicit map the design is located in the backend hierarchy.
  Session(std::shared_ptr<SimHandle> sim, SymbolTable table,
          std::map<std::string, std::string> sources = {},
          std::optional<HierarchyMap> map = std::nullopt);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // Starts the simulation thread. The simulation waits for a first resume.
  void start();
  // Detaches the core and joins the simulation thread.
  void stop();

  // Invokes `reply` exactly once, possibly on another thread.
  void handle(const std::string& text, const Reply& reply);
  void handle(const Json& request, const Reply& reply);

  // Events are delivered in emission order on the simulation thread.
  int subscribe(Subscriber s);
  void unsubscribe(int id);

  const std::vector<std::string>& warnings() const { return warnings_; }
  DebuggerCore& core() { return *core_; }

 private:
  Json execute(DebuggerCore& core, const std::string& command, const Json& payload);
  Json info(DebuggerCore& core, const Json& payload);
  void broadcast(const Json& event);

  std::shared_ptr<SimHandle> sim_;
  SymbolTable table_;
  std::map<std::string, std::string> sources_;
  std::vector<std::string> warnings_;
  std::unique_ptr<DebuggerCore> core_;
  std::thread thread_;

  std::mutex subscribers_mutex_;
  std::map<int, Subscriber> subscribers_;
  int next_subscriber_ = 0;
};

// WebSocket front end. One message per text frame.
class Server {
 public:
  // Binds immediately; port 0 picks a free port. Throws Error on bind failure.
  Server(Session& session, const std::string& address, uint16_t port);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  uint16_t port() const;
  // Serves on a background thread until stop().
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// WebSocket client used by the command-line debugger and the tests.
class Client {
 public:
  // Throws Error when the connection is refused.
  Client(const std::string& host, uint16_t port);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  // Sends a request with a fresh token and waits for its response.
  Json request(const std::string& command, Json payload = Json::object(), double timeout_s = 30);
  // Sends text as is.
  void send_raw(const std::string& text);
  // Next event not yet taken, waiting up to the timeout.
  std::optional<Json> next_event(double timeout_s);
  // Waits for a response with the given token.
  std::optional<Json> wait_response(const Json& token, double timeout_s);
  // Every message received so far, in arrival order.
  std::vector<Json> received() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hwdbg
