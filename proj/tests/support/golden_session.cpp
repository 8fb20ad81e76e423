#include "golden_session.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <thread>

#include "hwdbg/lowering.hpp"
#include "hwdbg/server.hpp"

namespace hwdbg::testing {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool settles(const Json& m) {
  const std::string c = m.value("command", "");
  return m.value("type", "") == "event" && (c == "stopped" || c == "ended" || c == "notice");
}

struct Party {
  std::string name;
  Client client;
  size_t seen = 0;
};

class Transcript {
 public:
  explicit Transcript(std::vector<Party*> parties) : parties_(std::move(parties)) {}

  // Sends a request and waits for its response, and when `settle` is set
  // also for a stop, end or notice event on every client.
  void step(Party& from, const std::string& command, Json payload, bool settle = false) {
    const std::string token = from.name + std::to_string(++tokens_);
    const Json request = protocol::request(token, command, std::move(payload));
    out_ << from.name << "> " << request.dump() << "\n";
    from.client.send_raw(request.dump());
    if (!from.client.wait_response(token, 30)) throw Error("no response to " + command);
    if (settle) {
      for (Party* p : parties_) wait_for(*p, settles);
    }
    flush();
  }

  void raw(Party& from, const std::string& text) {
    out_ << from.name << "> " << text << "\n";
    from.client.send_raw(text);
    if (!from.client.wait_response(nullptr, 30)) throw Error("no response to malformed input");
    flush();
  }

  std::string str() const { return out_.str(); }

 private:
  void wait_for(Party& p, bool (*pred)(const Json&)) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
    while (std::chrono::steady_clock::now() < deadline) {
      const auto msgs = p.client.received();
      for (size_t i = p.seen; i < msgs.size(); ++i) {
        if (pred(msgs[i])) return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    throw Error("client " + p.name + " saw no stop, end or notice");
  }

  void flush() {
    for (Party* p : parties_) {
      const auto msgs = p->client.received();
      for (; p->seen < msgs.size(); ++p->seen) out_ << p->name << "< " << msgs[p->seen].dump() << "\n";
    }
  }

  std::vector<Party*> parties_;
  std::ostringstream out_;
  int tokens_ = 0;
};

}  // namespace

std::string normalize_tokens(const std::string& transcript) {
  static const std::regex token_re(R"re("token":"([^"]*)")re");
  std::map<std::string, std::string> names;
  std::string out;
  auto begin = std::sregex_iterator(transcript.begin(), transcript.end(), token_re);
  size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const std::string tok = (*it)[1].str();
    auto [n, inserted] = names.emplace(tok, "T" + std::to_string(names.size() + 1));
    out += transcript.substr(last, static_cast<size_t>(it->position()) - last);
    out += "\"token\":\"" + n->second + "\"";
    last = static_cast<size_t>(it->position() + it->length());
  }
  return out + transcript.substr(last);
}

std::string listing_protocol_transcript(const std::string& fixtures) {
  const std::string source = read_file(fixtures + "/sum.mh");
  const Compiled c = compile(source, "sum.mh", OptLevel::kDebug);
  auto data = [](uint64_t a, uint64_t b) {
    return InputMap{{"data[0]", Value::make(a, 8)}, {"data[1]", Value::make(b, 8)}};
  };
  CycleSim sim(c.lowered.netlist, {data(3, 2), data(1, 1), data(2, 2)});
  sim.enable_trace();
  sim.run();

  auto replay = std::make_shared<VcdReplay>(sim.trace());
  Session session(replay, c.symbols, {{"sum.mh", source}});
  Server server(session, "127.0.0.1", 0);
  server.start();
  session.start();

  Party a{"A", Client("127.0.0.1", server.port())};
  Party b{"B", Client("127.0.0.1", server.port())};
  Transcript t({&a, &b});
  t.step(a, "info", {{"what", "capabilities"}});
  t.step(b, "info", {{"what", "file"}, {"file", "sum.mh"}});
  t.step(a, "set-breakpoint", {{"file", "sum.mh"}, {"line", 9}});
  t.step(b, "list-breakpoints", Json::object());
  t.step(a, "continue", Json::object(), true);
  t.step(b, "evaluate", {{"expr", "data[0] % 2"}});
  t.step(b, "info", {{"what", "threads"}});
  t.step(a, "set-value", {{"name", "data[0]"}, {"value", "1"}});
  t.step(b, "continue", Json::object(), true);
  t.step(a, "step-over", Json::object(), true);
  t.step(a, "frames", {{"stop-id", 3}});
  t.step(a, "reverse-continue", Json::object(), true);
  t.step(b, "reverse-continue", Json::object(), true);
  t.step(a, "reverse-continue", Json::object(), true);
  t.step(b, "set-breakpoint", {{"file", "sum.mh"}, {"line", 9}, {"condition", "sum >"}});
  t.step(b, "bogus", Json::object());
  t.raw(a, "{not json");
  t.step(a, "remove-breakpoint", {{"file", "sum.mh"}, {"line", 9}});
  t.step(b, "continue", Json::object(), true);
  t.step(a, "set-time", {{"time", 0}});
  t.step(a, "info", {{"what", "time"}});

  server.stop();
  session.stop();
  return normalize_tokens(t.str());
}

}  // namespace hwdbg::testing
