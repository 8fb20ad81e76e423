#include <deque>

#include "doctest.h"
#include "fixtures.hpp"
#include "hwdbg/lowering.hpp"
#include "hwdbg/runtime.hpp"
#include "oracle.hpp"
#include "random_program.hpp"
#include "script.hpp"

using namespace hwdbg;

namespace {

using testing::Script;

std::vector<InputMap> data_stimulus(uint64_t d0, uint64_t d1, size_t cycles = 1) {
  return std::vector<InputMap>(cycles, {{"data[0]", Value::make(d0, 8)}, {"data[1]", Value::make(d1, 8)}});
}

std::optional<Value> local(const FrameSnapshot& f, const std::string& name) {
  for (const auto& v : f.locals) {
    if (v.name == name) return v.value;
  }
  return std::nullopt;
}

struct Listing {
  Compiled c = compile(read_fixture("sum.mh"), "sum.mh", OptLevel::kDebug);
};

}  // namespace

TEST_CASE("listing program: one odd element stops once with pre-statement values") {
  Listing l;
  CycleSim sim(l.c.lowered.netlist, data_stimulus(3, 2));
  DebuggerCore core(sim, l.c.symbols, DebuggerCore::locate(sim, l.c.symbols));
  const auto ids = core.insert_breakpoint("sum.mh", 9);
  CHECK(ids.size() == 2);
  Script s(core);
  sim.run();
  REQUIRE(s.stops.size() == 1);
  const StopEvent& stop = s.stops[0];
  CHECK(stop.key.ordinal == 0);
  REQUIRE(stop.frames.size() == 1);
  const FrameSnapshot& f = stop.frames[0];
  CHECK(f.thread == "top");
  CHECK(local(f, "sum") == Value::make(0, 8));
  CHECK(local(f, "i") == loop_var_value(0));
  CHECK(local(f, "data[0]") == Value::make(3, 8));
  CHECK(local(f, "data[1]") == Value::make(2, 8));
  const auto tree = group_variables(f.locals);
  auto data = std::find_if(tree.begin(), tree.end(), [](const VarNode& n) { return n.name == "data"; });
  REQUIRE(data != tree.end());
  CHECK(data->is_array);
  CHECK(data->members.size() == 2);
}

TEST_CASE("listing program: two odd elements stop twice in one edge") {
  Listing l;
  CycleSim sim(l.c.lowered.netlist, data_stimulus(1, 1));
  DebuggerCore core(sim, l.c.symbols, DebuggerCore::locate(sim, l.c.symbols));
  core.insert_breakpoint("sum.mh", 9);
  Script s(core);
  sim.run();
  REQUIRE(s.stops.size() == 2);
  CHECK(s.stops[0].time == s.stops[1].time);
  CHECK(local(s.stops[0].frames[0], "sum") == Value::make(0, 8));
  CHECK(local(s.stops[1].frames[0], "sum") == Value::make(1, 8));
}

TEST_CASE("user conditions are ANDed with the enable condition") {
  Listing l;
  CycleSim sim(l.c.lowered.netlist, data_stimulus(1, 1, 3));
  DebuggerCore core(sim, l.c.symbols, DebuggerCore::locate(sim, l.c.symbols));
  CHECK_THROWS_AS(core.insert_breakpoint("sum.mh", 9, std::nullopt, "sum >"), SyntaxError);
  CHECK_THROWS_AS(core.insert_breakpoint("sum.mh", 9, std::nullopt, "nothing > 1"), Error);
  CHECK(core.breakpoints().empty());
  CHECK_THROWS_AS(core.insert_breakpoint("sum.mh", 3), Error);
  CHECK_THROWS_AS(core.insert_breakpoint("other.mh", 9), Error);
  core.insert_breakpoint("sum.mh", 9, std::nullopt, "i == 1");
  Script s(core);
  sim.run();
  REQUIRE(s.stops.size() == 3);
  for (const auto& st : s.stops) CHECK(st.key.ordinal == 1);
}

TEST_CASE("no breakpoints: the run completes without pauses") {
  Listing l;
  CycleSim sim(l.c.lowered.netlist, data_stimulus(1, 1, 10));
  DebuggerCore core(sim, l.c.symbols, DebuggerCore::locate(sim, l.c.symbols));
  Script s(core);
  CHECK(sim.run() == 10);
  CHECK(s.stops.empty());
  CHECK(core.edges_seen() == 10);

  core.insert_breakpoint("sum.mh", 9);
  CHECK(core.remove_breakpoint(core.breakpoints().front().row.id));
  CHECK(core.remove_breakpoints_at("sum.mh", 9) == 1);
  CHECK(core.breakpoints().empty());
}

TEST_CASE("attach needs a clock") {
  Listing l;
  VcdReplay r(parse_vcd_text("$scope module top $end\n$var wire 8 ! sum $end\n$upscope $end\n"
                             "$enddefinitions $end\n#0\nb0 !\n"));
  CHECK(r.clocks().empty());
  CHECK_THROWS_AS(DebuggerCore(r, l.c.symbols, HierarchyMap{"top", "top"}), Error);
}

TEST_CASE("evaluate and set_value at a stop") {
  Listing l;
  CycleSim sim(l.c.lowered.netlist, data_stimulus(3, 2));
  DebuggerCore core(sim, l.c.symbols, DebuggerCore::locate(sim, l.c.symbols));
  core.insert_breakpoint("sum.mh", 9);
  int stops = 0;
  core.set_listener([&](const CoreEvent& e) {
    if (e.kind != CoreEvent::Kind::kStopped) return;
    core.post([](DebuggerCore& c) { c.resume(ResumeCommand::kContinue); });
    // Forcing data[1] odd makes the second ordinal fire in the same edge.
    if (++stops == 2) {
      CHECK(e.stop->key.ordinal == 1);
      CHECK(core.evaluate("sum + i").bits == 3 + 1);
      return;
    }
    CHECK(core.evaluate("data[0] % 2") == Value::make(1, 8));
    CHECK(core.evaluate("sum + i").bits == 0);
    CHECK(core.evaluate("top.data_1").bits == 2);
    CHECK_THROWS_AS(core.evaluate("missing"), ExprError);
    CHECK_THROWS_AS(core.set_value("i", Value::make(1, 1)), Error);
    CHECK_THROWS_AS(core.set_value("sum", Value::make(1, 8)), Error);
    core.set_value("data[1]", Value::make(5, 8));
    CHECK(core.evaluate("data[1]").bits == 5);
    CHECK_THROWS_AS(core.set_time(0), CapabilityError);
  });
  sim.run();
  CHECK(stops == 2);
}

TEST_CASE("replay rejects set_value with a capability error") {
  Listing l;
  CycleSim sim(l.c.lowered.netlist, data_stimulus(3, 2));
  sim.enable_trace();
  sim.run();
  VcdReplay r(sim.trace());
  DebuggerCore core(r, l.c.symbols, DebuggerCore::locate(r, l.c.symbols));
  CHECK_THROWS_AS(core.set_value("data[0]", Value::make(1, 8)), CapabilityError);
}

TEST_CASE("hardware threads: one stop carries every firing instance") {
  const Compiled c = compile(read_fixture("adder.mh"), "adder.mh", OptLevel::kDebug);
  CycleSim sim(c.lowered.netlist, {{{"x", Value::make(4, 8)}}});
  DebuggerCore core(sim, c.symbols, DebuggerCore::locate(sim, c.symbols));
  CHECK(core.insert_breakpoint("adder.mh", 6).size() == 2);
  Script s(core);
  sim.run();
  REQUIRE(s.stops.size() == 1);
  const auto& frames = s.stops[0].frames;
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].thread == "top.u0");
  CHECK(frames[1].thread == "top.u1");
  // The second adder sums the first one's output with itself.
  const auto tree = group_variables(frames[1].instance_vars);
  auto io = std::find_if(tree.begin(), tree.end(), [](const VarNode& n) { return n.name == "io"; });
  REQUIRE(io != tree.end());
  CHECK_FALSE(io->is_array);
  REQUIRE(io->members.size() == 3);
  CHECK(io->members[0].name == "a");
  CHECK(io->members[0].leaf->rtl_name == "top.u1.io_a");
  CHECK(io->members[0].leaf->value == Value::make(5, 8));
}

TEST_CASE("hierarchy mapping into a testbench trace") {
  Listing l;
  CycleSim sim(l.c.lowered.netlist, data_stimulus(1, 2, 2));
  sim.enable_trace("tb.dut");
  sim.run();
  VcdReplay r(sim.trace());
  std::vector<std::string> warnings;
  const HierarchyMap m = DebuggerCore::locate(r, l.c.symbols, &warnings);
  CHECK(m.to == "tb.dut");
  CHECK(warnings.empty());
  DebuggerCore core(r, l.c.symbols, m);
  core.insert_breakpoint("sum.mh", 9);
  Script s(core);
  r.run();
  REQUIRE(s.stops.size() == 2);
  for (const auto& v : s.stops[0].frames[0].locals) {
    if (v.name == "sum") CHECK(v.rtl_name == "tb.dut.sum__0");
  }
}

TEST_CASE("stop events match the interpreter log") {
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    const std::string src = testing::random_program(seed);
    CAPTURE(src);
    const SourceProgram p = parse(src, "rand.mh");
    const auto stim = testing::random_stimulus(p, seed, 12);
    const ExecutionTrace oracle = interpret(p, stim);
    for (OptLevel level : {OptLevel::kDebug, OptLevel::kOptimized}) {
      const Compiled c = compile(src, "rand.mh", level);
      CycleSim sim(c.lowered.netlist, stim);
      const auto actual = testing::debugger_stops(sim, c.symbols);
      auto expected = testing::oracle_stops(oracle, c.symbols);
      if (level == OptLevel::kOptimized) {
        // Optimized frames may omit eliminated variables; compare the rest.
        REQUIRE(actual.size() == expected.size());
        for (size_t i = 0; i < actual.size(); ++i) {
          CHECK(actual[i].key == expected[i].key);
          CHECK(actual[i].time == expected[i].time);
          for (const auto& v : actual[i].locals) {
            CHECK(std::binary_search(expected[i].locals.begin(), expected[i].locals.end(), v));
          }
        }
        continue;
      }
      const auto d = testing::diff_stops(expected, actual);
      CHECK_MESSAGE(d.empty(), (d.empty() ? "" : d.front()));
    }
  }
}

TEST_CASE("intra-cycle reverse stepping on the cycle simulator") {
  Listing l;
  CycleSim sim(l.c.lowered.netlist, data_stimulus(1, 1, 2));
  DebuggerCore core(sim, l.c.symbols, DebuggerCore::locate(sim, l.c.symbols));
  core.insert_breakpoint("sum.mh", 8);
  core.insert_breakpoint("sum.mh", 9);
  using enum ResumeCommand;
  Script s(core, {kStepOver, kStepOver, kReverseStep, kReverseStep, kReverseStep, kContinue});
  sim.run();
  // Forward 8, 9#0, 9#1; back 9#0, 8; boundary; forward again in the same cycle.
  std::vector<std::pair<uint32_t, uint32_t>> keys;
  for (const auto& st : s.stops) keys.emplace_back(st.key.line, st.key.ordinal);
  const std::vector<std::pair<uint32_t, uint32_t>> expected{
      {8, 0}, {9, 0}, {9, 1}, {9, 0}, {8, 0}, {8, 0}, {9, 0}, {9, 1}, {8, 0}, {9, 0}, {9, 1}};
  CHECK(keys == expected);
  REQUIRE(s.notices.size() == 1);
  CHECK(s.notices[0].find("current cycle") != std::string::npos);
  CHECK(s.stops[4].time == 0);
  CHECK(s.stops[8].time == 10);
}

TEST_CASE("reverse continue on replay retraces the forward stops") {
  const std::string src = testing::random_program(5);
  const Compiled c = compile(src, "rand.mh", OptLevel::kDebug);
  const auto stim = testing::random_stimulus(c.program, 5, 10);
  CycleSim sim(c.lowered.netlist, stim);
  sim.enable_trace();
  sim.run();

  auto insert_all = [&](DebuggerCore& core) {
    for (uint32_t line : c.symbols.breakpoint_lines("rand.mh")) core.insert_breakpoint("rand.mh", line);
  };
  VcdReplay first(sim.trace());
  DebuggerCore fcore(first, c.symbols, DebuggerCore::locate(first, c.symbols));
  insert_all(fcore);
  Script forward(fcore);
  first.run();
  const size_t k = forward.stops.size();
  REQUIRE(k > 2);

  using enum ResumeCommand;
  VcdReplay second(sim.trace());
  DebuggerCore core(second, c.symbols, DebuggerCore::locate(second, c.symbols));
  insert_all(core);
  std::deque<ResumeCommand> cmds(k - 1, kContinue);
  cmds.push_back(kReverseContinue);
  for (size_t i = 0; i + 1 < k; ++i) cmds.push_back(kReverseContinue);
  Script s(core, cmds);
  second.run();

  REQUIRE(s.notices.size() == 1);
  REQUIRE(s.stops.size() == k + (k - 1) + k);
  auto same = [](const StopEvent& a, const StopEvent& b) {
    return a.time == b.time && a.key == b.key && a.frames == b.frames;
  };
  for (size_t i = 0; i < k; ++i) {
    CHECK(same(s.stops[i], forward.stops[i]));
    CHECK(same(s.stops[2 * k - 1 + i], forward.stops[i]));
  }
  for (size_t i = 0; i + 1 < k; ++i) CHECK(same(s.stops[k + i], forward.stops[k - 2 - i]));
}

TEST_CASE("optimized frames omit eliminated variables") {
  const char* src = R"(module top {
  clock clk;
  input x : 8;
  output y : 8;
  wire t : 8;
  comb {
    t = 0 + x;
    y = t + 1;
  }
}
)";
  const Compiled dbg = compile(src, "o.mh", OptLevel::kDebug);
  const Compiled opt = compile(src, "o.mh", OptLevel::kOptimized);
  auto names_at_y = [](const Compiled& c) {
    CycleSim sim(c.lowered.netlist, {{{"x", Value::make(7, 8)}}});
    DebuggerCore core(sim, c.symbols, DebuggerCore::locate(sim, c.symbols));
    core.insert_breakpoint("o.mh", 8);
    Script s(core);
    sim.run();
    std::vector<std::string> names;
    for (const auto& v : s.stops.at(0).frames.at(0).locals) {
      if (v.value) names.push_back(v.name);
    }
    return names;
  };
  const auto d = names_at_y(dbg);
  const auto o = names_at_y(opt);
  CHECK(std::find(d.begin(), d.end(), "t") != d.end());
  CHECK(std::find(o.begin(), o.end(), "t") == o.end());
  CHECK(std::find(o.begin(), o.end(), "x") != o.end());
}
