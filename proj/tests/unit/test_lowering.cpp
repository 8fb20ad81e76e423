#include <map>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "hwdbg/lowering.hpp"

using namespace hwdbg;

namespace {

std::vector<const Annotation*> on_line(const Lowered& l, uint32_t line) {
  std::vector<const Annotation*> out;
  for (const auto& a : l.annotations) {
    if (a.loc.line == line) out.push_back(&a);
  }
  return out;
}

std::string mapped(const Annotation& a, const std::string& name) {
  for (const auto& v : a.scope) {
    if (v.source_name == name) return v.rtl_name;
  }
  return "";
}

}  // namespace

TEST_CASE("listing program: two guarded accumulations") {
  const Lowered l = unroll_and_ssa(parse(read_fixture("sum.mh"), "sum.mh"));
  const auto acc = on_line(l, 9);
  REQUIRE(acc.size() == 2);
  CHECK(acc[0]->ordinal == 0);
  CHECK(acc[1]->ordinal == 1);
  CHECK(acc[0]->enable == "top.data_0 % 2");
  CHECK(acc[1]->enable == "top.data_1 % 2");
  // The initialization is unconditional.
  const auto init = on_line(l, 8);
  REQUIRE(init.size() == 1);
  CHECK(init[0]->enable == "1");
  CHECK(init[0]->target == "top.sum__0");
  // Pre-statement mappings: the initialization, then the first partial sum.
  CHECK(mapped(*acc[0], "sum") == "top.sum__0");
  CHECK(mapped(*acc[1], "sum") == "top.sum__1");
  CHECK(mapped(*acc[0], "i") == "0");
  CHECK(mapped(*acc[1], "i") == "1");
  CHECK(mapped(*acc[1], "data[1]") == "top.data_1");
  // `sum` is not yet defined before the initialization.
  CHECK(mapped(*init[0], "sum").empty());
}

TEST_CASE("enable is the AND of the condition stack") {
  const char* src = R"(module top {
  input a : 1;
  input b : 1;
  output x : 4;
  comb {
    x = 0;
    if a { if b { x = 1; } else { x = 2; } }
  }
}
)";
  const Lowered l = unroll_and_ssa(parse(src, "n.mh"));
  CHECK(on_line(l, 6)[0]->enable == "1");
  CHECK(on_line(l, 7)[0]->enable == "top.a && top.b");
  CHECK(on_line(l, 7)[1]->enable == "top.a && !top.b");
}

TEST_CASE("every net has at most one driver and names are unique") {
  const Lowered l = unroll_and_ssa(parse(read_fixture("sum.mh"), "sum.mh"));
  std::set<std::string> names;
  for (const Net& n : l.netlist.nets) CHECK(names.insert(n.name).second);
  const int s1 = l.netlist.find("top.sum__1");
  REQUIRE(s1 >= 0);
  REQUIRE(l.netlist.net(s1).driver.has_value());
  CHECK(l.netlist.net(s1).driver->kind == NExpr::Kind::kSelect);
  CHECK(render(*l.netlist.net(s1).driver, l.netlist) ==
        "(top.data_0 % 2) ? (top.sum__0 + top.data_0) : top.sum__0");
}

TEST_CASE("optimized: identity fold and dead temporaries") {
  const char* src = R"(module top {
  input x : 8;
  output y : 8;
  wire t : 8;
  wire dead : 8;
  comb {
    t = 0 + x;
    dead = x * 3;
    y = t;
  }
}
)";
  const SourceProgram p = parse(src, "o.mh");
  const Lowered dbg = optimize(unroll_and_ssa(p), OptLevel::kDebug);
  OptimizeReport rep;
  const Lowered opt = optimize(unroll_and_ssa(p), OptLevel::kOptimized, &rep);
  CHECK(dbg.netlist.find("top.dead") >= 0);
  CHECK(dbg.netlist.find("top.dead__0") >= 0);
  CHECK(opt.netlist.find("top.dead") < 0);
  CHECK(opt.netlist.find("top.dead__0") < 0);
  // Copies propagate, so `y` reads `x` directly and every SSA version of
  // `t` and `y` dies along with `dead`.
  const int y = opt.netlist.find("top.y");
  REQUIRE(y >= 0);
  CHECK(render(*opt.netlist.net(y).driver, opt.netlist) == "top.x");
  for (const char* gone : {"top.t", "top.t__0", "top.y__0"}) CHECK(opt.netlist.find(gone) < 0);
  CHECK(rep.removed_nets == 5);
  CHECK(rep.dropped_annotations == 3);

  const SymbolTable ds = collect_symbols(dbg.netlist, dbg.annotations);
  const SymbolTable os = collect_symbols(opt.netlist, opt.annotations);
  auto has_var = [](const SymbolTable& t, const std::string& source) {
    for (const auto& v : t.variables) {
      if (v.source_name == source) return true;
    }
    return false;
  };
  CHECK(has_var(ds, "dead"));
  CHECK_FALSE(has_var(os, "dead"));
}

TEST_CASE("constant propagation folds through SSA versions") {
  const char* src = R"(module top {
  input x : 8;
  output y : 8;
  comb {
    y = 2;
    y = y * 3;
    y = y + x;
  }
}
)";
  const Lowered opt = optimize(unroll_and_ssa(parse(src, "c.mh")), OptLevel::kOptimized);
  const int y2 = opt.netlist.find("top.y__2");
  REQUIRE(y2 >= 0);
  CHECK(render(*opt.netlist.net(y2).driver, opt.netlist) == "6 + top.x");
}

TEST_CASE("symbols: listing program has two breakpoints on the accumulation line") {
  const Compiled c = compile(read_fixture("sum.mh"), "sum.mh", OptLevel::kDebug);
  const auto rows = c.symbols.breakpoints_at("sum.mh", 9, std::nullopt);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ordinal == 0);
  CHECK(rows[1].ordinal == 1);
  CHECK(rows[0].order_index < rows[1].order_index);
  CHECK(rows[0].enable == "top.data_0 % 2");
  CHECK(c.symbols.breakpoints_at("sum.mh", 7, std::nullopt).empty());
  CHECK(c.symbols.resolve_scoped(rows[0].id, "sum") == "top.sum__0");
  CHECK(c.symbols.resolve_scoped(rows[1].id, "sum") == "top.sum__1");
  CHECK(c.symbols.resolve_instance(1, "sum") == "top.sum");
  CHECK(c.symbols.resolve_instance(1, "data[1]") == "top.data_1");
  CHECK_THROWS_AS(c.symbols.resolve_instance(1, "nope"), Error);
  c.symbols.validate();
}

TEST_CASE("symbols: empty module and repeated instances") {
  const Compiled empty = compile("module top {\n  clock clk;\n}\n", "e.mh", OptLevel::kDebug);
  CHECK(empty.symbols.instances.size() == 1);
  CHECK(empty.symbols.breakpoints.empty());

  const char* src = R"(module acc {
  input data[2] : 8;
  output sum : 8;
  comb {
    sum = 0;
    for i in 0..2 { if data[i] % 2 { sum = sum + data[i]; } }
  }
}
module top {
  input d[2] : 8;
  output s0 : 8;
  output s1 : 8;
  inst a : acc (data[0] = d[0], data[1] = d[1], sum => s0);
  inst b : acc (data[0] = d[1], data[1] = d[0], sum => s1);
}
)";
  const Compiled c = compile(src, "r.mh", OptLevel::kDebug);
  const auto rows = c.symbols.breakpoints_at("r.mh", 6, std::nullopt);
  CHECK(rows.size() == 4);
  std::set<int64_t> instances;
  for (const auto& r : rows) instances.insert(r.instance_id);
  CHECK(instances.size() == 2);
  const InstanceRow* b = c.symbols.instance_by_name("top.b");
  REQUIRE(b != nullptr);
  CHECK(c.symbols.resolve_instance(b->id, "data[0]") == "top.b.data_0");
}

TEST_CASE("emit_verilog_like is deterministic and shows the mux") {
  const std::string src = read_fixture("sum.mh");
  const std::string a = emit_verilog_like(unroll_and_ssa(parse(src, "sum.mh")).netlist);
  const std::string b = emit_verilog_like(unroll_and_ssa(parse(src, "sum.mh")).netlist);
  CHECK(a == b);
  CHECK(a.find("assign top.sum__1 = (top.data_0 % 2) ? ") != std::string::npos);
  const std::string e = emit_verilog_like(unroll_and_ssa(parse("module top {\n}\n", "e.mh")).netlist);
  CHECK(e.find("module top") != std::string::npos);
  CHECK(e.find("assign") == std::string::npos);
}
