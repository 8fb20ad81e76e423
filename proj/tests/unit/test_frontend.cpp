#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "hwdbg/frontend.hpp"

using namespace hwdbg;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse(text, "t.mh");
  } catch (const SyntaxError& e) {
    return e.what();
  }
  return "";
}

std::vector<InputMap> data_stimulus(uint64_t d0, uint64_t d1) {
  return {InputMap{{"data[0]", Value::make(d0, 8)}, {"data[1]", Value::make(d1, 8)}}};
}

}  // namespace

TEST_CASE("listing program parses") {
  const SourceProgram p = parse(read_fixture("sum.mh"), "sum.mh");
  CHECK(p.top == "top");
  const ModuleDef& m = p.top_module();
  REQUIRE(m.find_var("data") != nullptr);
  CHECK(m.find_var("data")->array_size == 2);
  CHECK(m.find_var("sum")->kind == VarKind::kOutput);
  CHECK(m.blocks.size() == 1);
}

TEST_CASE("interpreter: accumulation line executes once per odd element") {
  const SourceProgram p = parse(read_fixture("sum.mh"), "sum.mh");
  for (uint64_t d0 = 0; d0 < 6; ++d0) {
    for (uint64_t d1 : {0u, 1u, 2u, 255u}) {
      // Oracle: sum of odd elements modulo 2^8, and the list of partial sums
      // seen before each accumulation.
      uint64_t sum = 0;
      std::vector<uint64_t> pre_sums;
      for (uint64_t d : {d0, d1}) {
        if (d % 2) {
          pre_sums.push_back(sum);
          sum = (sum + d) & 0xff;
        }
      }
      const ExecutionTrace t = interpret(p, data_stimulus(d0, d1));
      CHECK(t.cycles.at(0).values.at("top.sum") == Value::make(sum, 8));
      std::vector<uint64_t> seen;
      for (const auto& e : t.log) {
        if (e.loc.line != 9) continue;
        for (const auto& nv : e.pre) {
          if (nv.name == "sum") seen.push_back(nv.value.bits);
        }
      }
      CHECK(seen == pre_sums);
    }
  }
}

TEST_CASE("interpreter: loop variable and ordinal in scope") {
  const SourceProgram p = parse(read_fixture("sum.mh"), "sum.mh");
  const ExecutionTrace t = interpret(p, data_stimulus(1, 1));
  std::vector<uint32_t> ordinals;
  for (const auto& e : t.log) {
    if (e.loc.line != 9) continue;
    ordinals.push_back(e.ordinal);
    CHECK(e.pre.front().name == "i");
    CHECK(e.pre.front().value.bits == e.ordinal);
  }
  CHECK(ordinals == std::vector<uint32_t>{0, 1});
}

TEST_CASE("registers update at the edge and reset synchronously") {
  const char* src = R"(module top {
  clock clk;
  input rst : 1;
  input en : 1;
  reg count : 4 @clk reset 3;
  output q : 4;
  seq @clk { if en { count = count + 1; } }
  comb { q = count; }
}
)";
  const SourceProgram p = parse(src, "c.mh");
  std::vector<InputMap> stim;
  const std::vector<std::pair<int, int>> seq{{1, 0}, {0, 1}, {0, 1}, {0, 0}, {1, 1}, {0, 1}};
  for (auto [rst, en] : seq) {
    stim.push_back({{"rst", Value::make(rst, 1)}, {"en", Value::make(en, 1)}});
  }
  const ExecutionTrace t = interpret(p, stim);
  // Oracle: value visible at each edge, updated after it.
  uint64_t count = 3;
  for (size_t c = 0; c < seq.size(); ++c) {
    CHECK(t.cycles[c].values.at("top.q").bits == count);
    if (seq[c].first) {
      count = 3;
    } else if (seq[c].second) {
      count = (count + 1) & 0xf;
    }
  }
}

TEST_CASE("hierarchy: child outputs feed the parent") {
  const char* src = R"(module add {
  input io.a : 8;
  input io.b : 8;
  output io.s : 8;
  comb { io.s = io.a + io.b; }
}
module top {
  clock clk;
  input x : 8;
  output y : 8;
  wire t : 8;
  inst u0 : add (io.a = x, io.b = 1, io.s => t);
  inst u1 : add (io.a = t, io.b = t, io.s => y);
}
)";
  const SourceProgram p = parse(src, "h.mh");
  const ExecutionTrace t = interpret(p, {{{"x", Value::make(20, 8)}}});
  CHECK(t.cycles[0].values.at("top.y").bits == ((20 + 1) * 2) % 256);
  CHECK(t.cycles[0].values.at("top.u0.io_s").bits == 21);
}

TEST_CASE("validation errors carry file:line:col") {
  CHECK(error_of("module top {\n  input a : 4;\n  output b : 4;\n  comb { if a { b = 1; } }\n}\n")
            .find("t.mh:4:") == 0);
  CHECK(error_of("module top {\n  input a : 4;\n  output b : 4;\n  comb { if a { b = 1; } }\n}\n")
            .find("latch") != std::string::npos);
  CHECK(error_of("module top {\n  input a : 4;\n  output b : 4;\n"
                 "  comb { b = 0; for i in 0..a { b = 1; } }\n}\n")
            .find("non-constant loop bound") != std::string::npos);
  CHECK(error_of("module top {\n  output b : 4;\n  wire w : 4;\n  comb { b = w; w = 1; }\n}\n")
            .find("used before it is assigned") != std::string::npos);
  CHECK(error_of("module top {\n  output b : 4;\n  wire w : 4;\n  comb { b = w; }\n"
                 "  comb { w = b; }\n}\n")
            .find("combinational cycle") != std::string::npos);
  CHECK(error_of("module top {\n  output b : 4\n}\n").find("t.mh:3:1") == 0);
  CHECK(error_of("module top {\n  output b : 4;\n}\n").find("never driven") != std::string::npos);
}

TEST_CASE("pretty printer output reparses to the same structure") {
  const SourceProgram p = parse(read_fixture("sum.mh"), "sum.mh");
  const SourceProgram q = parse(pretty_print(p), "sum.mh");
  CHECK(same_structure(p, q));
}

TEST_CASE("stimulus files hold values and reject bad input") {
  const SourceProgram p = parse(read_fixture("sum.mh"), "sum.mh");
  const auto s = parse_stimulus("# header\n0,data[0]=3,data[1]=2\n2,data[1]=1\n", p);
  REQUIRE(s.size() == 3);
  CHECK(s[1].at("data[0]").bits == 3);
  CHECK(s[2].at("data[1]").bits == 1);
  CHECK_THROWS_AS(parse_stimulus("0,data[0]=256\n", p), Error);
  CHECK_THROWS_AS(parse_stimulus("0,bogus=1\n", p), Error);
  CHECK(parse_stimulus("", p, 4).size() == 4);
}
