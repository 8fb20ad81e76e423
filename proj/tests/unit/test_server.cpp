#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "golden_session.hpp"
#include "hwdbg/lowering.hpp"
#include "hwdbg/server.hpp"

using namespace hwdbg;

namespace {

struct Rig {
  Compiled c = compile(read_fixture("sum.mh"), "sum.mh", OptLevel::kDebug);
  std::shared_ptr<SimHandle> sim;
  std::unique_ptr<Session> session;
  std::unique_ptr<Server> server;

  explicit Rig(bool replay, size_t cycles = 4) {
    std::vector<InputMap> stim(cycles, {{"data[0]", Value::make(3, 8)}, {"data[1]", Value::make(2, 8)}});
    if (replay) {
      CycleSim s(c.lowered.netlist, stim);
      s.enable_trace();
      s.run();
      sim = std::make_shared<VcdReplay>(s.trace());
    } else {
      sim = std::make_shared<CycleSim>(c.lowered.netlist, stim);
    }
    session = std::make_unique<Session>(sim, c.symbols, std::map<std::string, std::string>{{"sum.mh", read_fixture("sum.mh")}});
    server = std::make_unique<Server>(*session, "127.0.0.1", 0);
    server->start();
    session->start();
  }
  ~Rig() {
    server->stop();
    session->stop();
  }
  uint16_t port() const { return server->port(); }
};

Json wait_event(Client& c, const std::string& name) {
  for (;;) {
    auto e = c.next_event(20);
    REQUIRE(e.has_value());
    if ((*e)["command"] == name) return *e;
  }
}

bool ok(const Json& r) { return r["status"] == "success"; }

}  // namespace

TEST_CASE("server: breakpoints, broadcast stops and evaluation") {
  Rig rig(true);
  Client a("127.0.0.1", rig.port());
  Client b("127.0.0.1", rig.port());
  const Json r = a.request("set-breakpoint", {{"file", "sum.mh"}, {"line", 9}});
  REQUIRE(ok(r));
  CHECK(r["payload"]["ids"].size() == 2);
  CHECK(ok(a.request("continue")));
  const Json sa = wait_event(a, "stopped");
  const Json sb = wait_event(b, "stopped");
  CHECK(sa == sb);
  CHECK(sa["payload"]["line"] == 9);
  CHECK(sa["payload"]["threads"] == Json::array({"top"}));
  const Json v = b.request("evaluate", {{"expr", "data[0] % 2"}});
  CHECK(v["payload"]["value"] == "1");
  // The frame groups the array under its base name.
  const Json locals = sa["payload"]["frames"][0]["locals"];
  bool saw_data = false;
  for (const auto& n : locals) {
    if (n["name"] == "data") {
      saw_data = true;
      CHECK(n["array"] == true);
      CHECK(n["members"][0]["value"] == "3");
    }
  }
  CHECK(saw_data);

  const Json cap = a.request("set-value", {{"name", "data[0]"}, {"value", "1"}});
  CHECK(cap["status"] == "error");
  CHECK(cap["reason"] == "capability");
  const Json file = a.request("info", {{"what", "file"}, {"file", "sum.mh"}});
  CHECK(file["payload"]["text"] == read_fixture("sum.mh"));
  CHECK(file["payload"]["breakpoint-lines"] == Json::array({8, 9}));
}

TEST_CASE("server: malformed and unknown requests keep the connection") {
  Rig rig(false);
  Client a("127.0.0.1", rig.port());
  a.send_raw("{oops");
  auto r = a.wait_response(nullptr, 10);
  REQUIRE(r.has_value());
  CHECK((*r)["reason"] == "malformed");
  CHECK(a.request("nope")["reason"] == "unknown-command");
  CHECK(a.request("set-breakpoint", {{"file", "sum.mh"}})["reason"] == "invalid");
  CHECK(a.request("set-breakpoint", {{"file", "sum.mh"}, {"line", 3}})["reason"] == "failed");
  CHECK(a.request("set-time", {{"time", 5}})["reason"] == "capability");
  CHECK(a.request("info", {{"what", "capabilities"}})["payload"]["reverse"] == "intra-cycle");
  CHECK(ok(a.request("info", {{"what", "time"}})));
}

TEST_CASE("server: set-value forces an input on the cycle simulator") {
  Rig rig(false);
  Client a("127.0.0.1", rig.port());
  REQUIRE(ok(a.request("set-breakpoint", {{"file", "sum.mh"}, {"line", 9}})));
  REQUIRE(ok(a.request("continue")));
  wait_event(a, "stopped");
  const Json r = a.request("set-value", {{"name", "data[1]"}, {"value", "7"}});
  REQUIRE(ok(r));
  CHECK(r["payload"]["value"] == "7");
  CHECK(a.request("set-value", {{"name", "data[1]"}, {"value", "700"}})["reason"] == "invalid");
  REQUIRE(ok(a.request("continue")));
  // data[1] is now odd, so the second ordinal fires in the same edge.
  const Json s = wait_event(a, "stopped");
  CHECK(s["payload"]["ordinal"] == 1);
  CHECK(s["payload"]["time"] == 0);
}

TEST_CASE("server: a disconnect while paused leaves the core paused") {
  Rig rig(true);
  auto a = std::make_unique<Client>("127.0.0.1", rig.port());
  Client b("127.0.0.1", rig.port());
  REQUIRE(ok(a->request("set-breakpoint", {{"file", "sum.mh"}, {"line", 9}})));
  REQUIRE(ok(a->request("continue")));
  wait_event(b, "stopped");
  a.reset();
  CHECK(b.request("info", {{"what", "status"}})["payload"]["mode"] == "paused");
  REQUIRE(ok(b.request("continue")));
  const Json s = wait_event(b, "stopped");
  CHECK(s["payload"]["time"] == 10);
}

TEST_CASE("server: every token gets exactly one response") {
  Rig rig(true, 200);
  Client a("127.0.0.1", rig.port());
  Client b("127.0.0.1", rig.port());
  REQUIRE(ok(a.request("set-breakpoint", {{"file", "sum.mh"}, {"line", 9}})));
  auto hammer = [](Client& c, const std::string& prefix) {
    for (int i = 0; i < 60; ++i) {
      const std::string tok = prefix + std::to_string(i);
      const char* cmd = i % 3 == 0 ? "continue" : (i % 3 == 1 ? "info" : "list-breakpoints");
      Json payload = i % 3 == 1 ? Json{{"what", "time"}} : Json::object();
      c.send_raw(protocol::request(tok, cmd, payload).dump());
    }
  };
  std::thread ta([&] { hammer(a, "a"); });
  std::thread tb([&] { hammer(b, "b"); });
  ta.join();
  tb.join();
  for (auto* c : {&a, &b}) {
    const std::string prefix = c == &a ? "a" : "b";
    for (int i = 0; i < 60; ++i) REQUIRE(c->wait_response(prefix + std::to_string(i), 20).has_value());
  }
  for (auto* c : {&a, &b}) {
    std::multiset<std::string> tokens;
    std::map<uint64_t, int> stopped_at;
    const auto msgs = c->received();
    for (size_t i = 0; i < msgs.size(); ++i) {
      const Json& m = msgs[i];
      if (m["type"] == "response") tokens.insert(m["token"].get<std::string>());
      if (m["type"] == "event" && m["command"] == "stopped") stopped_at[m["payload"]["id"]] = static_cast<int>(i);
      if (m["type"] == "event" && m["command"] == "resumed") {
        const uint64_t id = m["payload"]["id"];
        if (id != 0) {
          REQUIRE(stopped_at.count(id));
          CHECK(stopped_at[id] < static_cast<int>(i));
        }
      }
    }
    for (const auto& t : tokens) CHECK(tokens.count(t) == 1);
  }
}

TEST_CASE("protocol golden transcript") {
  const std::string t = testing::listing_protocol_transcript(HWDBG_FIXTURES);
  CHECK(testing::listing_protocol_transcript(HWDBG_FIXTURES) == t);
  const std::string path = std::string(HWDBG_GOLDEN) + "/protocol_listing.txt";
  if (std::getenv("HWDBG_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(path) << t;
  }
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == t);
}
