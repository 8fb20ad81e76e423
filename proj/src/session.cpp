#include <cstdlib>

#include "hwdbg/server.hpp"

namespace hwdbg {

uint16_t default_port() {
  if (const char* env = std::getenv("HGDB_PORT")) {
    auto p = parse_uint(env);
    if (p && *p > 0 && *p <= 65535) return static_cast<uint16_t>(*p);
  }
  return kDefaultPort;
}

namespace protocol {

Json value(const std::optional<Value>& v) {
  if (!v) return Json{{"value", "unavailable"}};
  return Json{{"value", v->to_string()}, {"width", v->width}};
}

Json variables(const std::vector<VarNode>& nodes) {
  Json out = Json::array();
  for (const VarNode& n : nodes) {
    Json j{{"name", n.name}};
    if (n.leaf) {
      j.update(value(n.leaf->value));
      j["rtl"] = n.leaf->rtl_name;
    }
    if (!n.members.empty()) {
      if (n.is_array) j["array"] = true;
      j["members"] = variables(n.members);
    }
    out.push_back(std::move(j));
  }
  return out;
}

Json frame(const FrameSnapshot& f) {
  return Json{{"thread", f.thread},
              {"breakpoint", f.breakpoint_id},
              {"fired", f.fired},
              {"locals", variables(group_variables(f.locals))},
              {"instance", variables(group_variables(f.instance_vars))}};
}

Json stop(const StopEvent& s) {
  Json threads = Json::array();
  Json frames = Json::array();
  for (const auto& f : s.frames) {
    threads.push_back(f.thread);
    frames.push_back(frame(f));
  }
  return Json{{"id", s.id},         {"time", s.time},        {"file", s.key.file},
              {"line", s.key.line}, {"column", s.key.column}, {"ordinal", s.key.ordinal},
              {"reverse", s.reverse}, {"threads", threads},  {"frames", frames}};
}

Json request(const std::string& token, const std::string& command, Json payload) {
  return Json{{"type", "request"}, {"token", token}, {"command", command}, {"payload", payload}};
}

Json success(const Json& token, const std::string& command, Json payload) {
  return Json{{"type", "response"}, {"token", token},      {"command", command},
              {"status", "success"}, {"payload", payload}};
}

Json failure(const Json& token, const std::string& command, const std::string& reason,
             const std::string& message) {
  return Json{{"type", "response"}, {"token", token},   {"command", command},
              {"status", "error"},  {"reason", reason}, {"message", message}};
}

Json event(const std::string& name, Json payload) {
  return Json{{"type", "event"}, {"command", name}, {"payload", payload}};
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{
      "set-breakpoint", "remove-breakpoint", "list-breakpoints", "continue", "step-over",
      "reverse-continue", "reverse-step", "pause", "frames", "evaluate", "set-value", "info",
      "set-time"};
  return names;
}

}  // namespace protocol

namespace {

// Payload validation failure.
struct Invalid : Error {
  using Error::Error;
};

const Json& field(const Json& payload, const char* name) {
  auto it = payload.find(name);
  if (it == payload.end()) throw Invalid(std::string("missing field '") + name + "'");
  return *it;
}

std::string string_field(const Json& payload, const char* name) {
  const Json& f = field(payload, name);
  if (!f.is_string()) throw Invalid(std::string("field '") + name + "' must be a string");
  return f.get<std::string>();
}

uint64_t uint_field(const Json& payload, const char* name) {
  const Json& f = field(payload, name);
  if (f.is_number_unsigned()) return f.get<uint64_t>();
  if (f.is_string()) {
    if (auto v = parse_uint(f.get<std::string>())) return *v;
  }
  throw Invalid(std::string("field '") + name + "' must be a non-negative integer");
}

std::optional<uint64_t> optional_uint(const Json& payload, const char* name) {
  if (!payload.contains(name) || payload[name].is_null()) return std::nullopt;
  return uint_field(payload, name);
}

std::string optional_string(const Json& payload, const char* name) {
  if (!payload.contains(name) || payload[name].is_null()) return "";
  return string_field(payload, name);
}

uint32_t to_line(uint64_t v, const char* name) {
  if (v == 0 || v > UINT32_MAX) throw Invalid(std::string("field '") + name + "' is out of range");
  return static_cast<uint32_t>(v);
}

Json breakpoint_json(const InsertedBreakpoint& b) {
  return Json{{"id", b.row.id},         {"file", b.row.file},       {"line", b.row.line},
              {"column", b.row.column}, {"ordinal", b.row.ordinal}, {"instance", b.instance},
              {"enable", b.row.enable}, {"condition", b.condition}};
}

Json hier_json(const HierNode& n) {
  Json children = Json::array();
  for (const auto& c : n.children) children.push_back(hier_json(c));
  return Json{{"name", n.name}, {"signals", n.signals}, {"children", children}};
}

std::optional<ResumeCommand> resume_command(const std::string& c) {
  if (c == "continue") return ResumeCommand::kContinue;
  if (c == "step-over") return ResumeCommand::kStepOver;
  if (c == "reverse-continue") return ResumeCommand::kReverseContinue;
  if (c == "reverse-step") return ResumeCommand::kReverseStep;
  return std::nullopt;
}

}  // namespace

Session::Session(std::shared_ptr<SimHandle> sim, SymbolTable table,
                 std::map<std::string, std::string> sources, std::optional<HierarchyMap> map)
    : sim_(std::move(sim)), table_(std::move(table)), sources_(std::move(sources)) {
  table_.build_index();
  const HierarchyMap m = map ? *map : DebuggerCore::locate(*sim_, table_, &warnings_);
  core_ = std::make_unique<DebuggerCore>(*sim_, table_, m);
  core_->set_listener([this](const CoreEvent& e) {
    switch (e.kind) {
      case CoreEvent::Kind::kStopped:
        broadcast(protocol::event("stopped", protocol::stop(*e.stop)));
        break;
      case CoreEvent::Kind::kResumed:
        broadcast(protocol::event("resumed", Json{{"id", e.stop_id}}));
        break;
      case CoreEvent::Kind::kNotice:
        broadcast(protocol::event("notice", Json{{"message", e.text}, {"time", core_->time()}}));
        break;
      case CoreEvent::Kind::kEnded:
        broadcast(protocol::event("ended", Json{{"time", core_->time()}}));
        break;
    }
  });
}

Session::~Session() { stop(); }

void Session::start() {
  if (thread_.joinable()) return;
  thread_ = std::thread([this] { core_->serve(); });
}

void Session::stop() {
  if (!thread_.joinable()) return;
  core_->post([](DebuggerCore& c) { c.detach(); });
  thread_.join();
}

int Session::subscribe(Subscriber s) {
  std::lock_guard lock(subscribers_mutex_);
  subscribers_.emplace(next_subscriber_, std::move(s));
  return next_subscriber_++;
}

void Session::unsubscribe(int id) {
  std::lock_guard lock(subscribers_mutex_);
  subscribers_.erase(id);
}

void Session::broadcast(const Json& event) {
  std::lock_guard lock(subscribers_mutex_);
  for (const auto& [id, s] : subscribers_) s(event);
}

void Session::handle(const std::string& text, const Reply& reply) {
  Json request;
  try {
    request = Json::parse(text);
  } catch (const Json::exception& e) {
    reply(protocol::failure(nullptr, "", "malformed", std::string("invalid JSON: ") + e.what()));
    return;
  }
  handle(request, reply);
}

void Session::handle(const Json& request, const Reply& reply) {
  if (!request.is_object()) {
    reply(protocol::failure(nullptr, "", "malformed", "a request must be a JSON object"));
    return;
  }
  const Json token = request.contains("token") ? request["token"] : Json(nullptr);
  const std::string command =
      request.contains("command") && request["command"].is_string() ? request["command"].get<std::string>() : "";
  if (request.value("type", "") != "request" || !token.is_string() || command.empty()) {
    reply(protocol::failure(token, command, "malformed",
                            "a request needs type \"request\", a string token and a command"));
    return;
  }
  const auto& names = protocol::commands();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    reply(protocol::failure(token, command, "unknown-command", "unknown command '" + command + "'"));
    return;
  }
  Json payload = request.contains("payload") ? request["payload"] : Json::object();
  if (payload.is_null()) payload = Json::object();
  if (!payload.is_object()) {
    reply(protocol::failure(token, command, "invalid", "payload must be an object"));
    return;
  }
  if (command == "pause") {
    core_->request_pause();
    reply(protocol::success(token, command));
    return;
  }
  core_->post([this, token, command, payload, reply](DebuggerCore& core) {
    Json response;
    std::optional<ResumeCommand> resume = resume_command(command);
    try {
      if (resume) {
        if (core.mode() == RunMode::kRunning) throw Invalid("the simulation is running");
        response = protocol::success(token, command);
      } else {
        response = protocol::success(token, command, execute(core, command, payload));
      }
    } catch (const CapabilityError& e) {
      response = protocol::failure(token, command, "capability", e.what());
      resume.reset();
    } catch (const Invalid& e) {
      response = protocol::failure(token, command, "invalid", e.what());
      resume.reset();
    } catch (const SyntaxError& e) {
      response = protocol::failure(token, command, "invalid", e.what());
      resume.reset();
    } catch (const ExprError& e) {
      response = protocol::failure(token, command, "invalid", e.what());
      resume.reset();
    } catch (const std::exception& e) {
      response = protocol::failure(token, command, "failed", e.what());
      resume.reset();
    }
    reply(response);
    if (resume) core.resume(*resume);
  });
}

Json Session::execute(DebuggerCore& core, const std::string& command, const Json& payload) {
  if (command == "set-breakpoint") {
    const std::string file = string_field(payload, "file");
    const uint32_t line = to_line(uint_field(payload, "line"), "line");
    std::optional<uint32_t> column;
    if (auto c = optional_uint(payload, "column")) column = to_line(*c, "column");
    const auto ids = core.insert_breakpoint(file, line, column, optional_string(payload, "condition"));
    return Json{{"ids", ids}};
  }
  if (command == "remove-breakpoint") {
    if (payload.contains("id")) {
      const auto id = uint_field(payload, "id");
      if (!core.remove_breakpoint(static_cast<int64_t>(id))) {
        throw Error("no breakpoint " + std::to_string(id) + " is inserted");
      }
      return Json{{"removed", 1}};
    }
    const size_t n = core.remove_breakpoints_at(string_field(payload, "file"),
                                                to_line(uint_field(payload, "line"), "line"));
    if (n == 0) throw Error("no breakpoint is inserted at that location");
    return Json{{"removed", n}};
  }
  if (command == "list-breakpoints") {
    Json list = Json::array();
    for (const auto& b : core.breakpoints()) list.push_back(breakpoint_json(b));
    return Json{{"breakpoints", list}};
  }
  if (command == "frames") {
    const StopEvent* s = core.current_stop();
    const uint64_t id = payload.contains("stop-id") ? uint_field(payload, "stop-id") : 0;
    if (s == nullptr) throw Error("not stopped at a breakpoint");
    if (id != 0 && id != s->id) throw Error("stop " + std::to_string(id) + " is no longer current");
    return protocol::stop(*s);
  }
  if (command == "evaluate") {
    return protocol::value(core.evaluate(string_field(payload, "expr"), optional_string(payload, "thread")));
  }
  if (command == "set-value") {
    if (!core.sim().can_set_value()) throw CapabilityError("the backend cannot set signal values");
    const std::string name = string_field(payload, "name");
    const uint64_t bits = uint_field(payload, "value");
    const std::string thread = optional_string(payload, "thread");
    const Value current = core.evaluate(name, thread);
    if ((bits & ~width_mask(current.width)) != 0) {
      throw Invalid("value " + std::to_string(bits) + " does not fit " +
                    std::to_string(current.width) + " bits");
    }
    core.set_value(name, Value::make(bits, current.width), thread);
    return protocol::value(core.evaluate(name, thread));
  }
  if (command == "set-time") {
    core.set_time(uint_field(payload, "time"));
    return Json{{"time", core.time()}};
  }
  if (command == "info") return info(core, payload);
  throw Error("unhandled command '" + command + "'");
}

Json Session::info(DebuggerCore& core, const Json& payload) {
  const std::string what = string_field(payload, "what");
  if (what == "time") return Json{{"time", core.time()}};
  if (what == "status") {
    const StopEvent* s = core.current_stop();
    return Json{{"mode", std::string(to_string(core.mode()))},
                {"time", core.time()},
                {"stop", s != nullptr ? Json(s->id) : Json(nullptr)},
                {"warnings", warnings_}};
  }
  if (what == "capabilities") {
    const bool t = core.sim().can_set_time();
    return Json{{"set-value", core.sim().can_set_value()},
                {"set-time", t},
                {"reverse", t ? "full" : "intra-cycle"}};
  }
  if (what == "threads") {
    Json threads = Json::array();
    if (const StopEvent* s = core.current_stop()) {
      for (const auto& f : s->frames) threads.push_back(Json{{"thread", f.thread}, {"fired", f.fired}});
    }
    return Json{{"threads", threads}};
  }
  if (what == "breakpoints") return execute(core, "list-breakpoints", Json::object());
  if (what == "hierarchy") {
    Json instances = Json::array();
    for (const auto& i : table_.instances) {
      instances.push_back(Json{{"id", i.id},
                               {"name", i.name},
                               {"module", i.module_name},
                               {"backend", core.hierarchy_map().apply(i.name)}});
    }
    Json clocks = core.sim().clocks();
    return Json{{"instances", instances}, {"clocks", clocks}, {"backend", hier_json(core.sim().hierarchy())}};
  }
  if (what == "files") return Json{{"files", table_.files()}};
  if (what == "file") {
    const std::string requested = string_field(payload, "file");
    const auto file = table_.match_file(requested);
    if (!file) throw Error("no source file matches '" + requested + "'");
    auto it = sources_.find(*file);
    if (it == sources_.end()) throw Error("the source of '" + *file + "' is not available");
    return Json{{"file", *file}, {"text", it->second}, {"breakpoint-lines", table_.breakpoint_lines(*file)}};
  }
  throw Invalid("unknown info topic '" + what + "'");
}

}  // namespace hwdbg
