#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "hwdbg/lowering.hpp"

using namespace hwdbg;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() /
          ("hwdbg_" + std::to_string(::getpid()) + "_" + name))
      .string();
}

const char* kTwoInstances = R"(module acc {
  input data[2] : 8;
  input io.k : 8;
  output sum : 8;
  comb {
    sum = io.k;
    for i in 0..2 { if data[i] % 2 { sum = sum + data[i]; } }
  }
}
module top {
  input d[2] : 8;
  output s0 : 8;
  output s1 : 8;
  inst a : acc (data[0] = d[0], data[1] = d[1], io.k = 1, sum => s0);
  inst b : acc (data[0] = d[1], data[1] = d[0], io.k = 2, sum => s1);
}
)";

}  // namespace

TEST_CASE("store/load round-trips") {
  const std::string path = temp_path("rt.hgdb");
  for (const SymbolTable& t :
       {compile(read_fixture("sum.mh"), "sum.mh", OptLevel::kDebug).symbols,
        compile(kTwoInstances, "two.mh", OptLevel::kDebug).symbols, SymbolTable{}}) {
    store(t, path);
    CHECK(load(path) == t);
    CHECK(from_json(to_json(t)) == t);
  }
  std::filesystem::remove(path);
}

TEST_CASE("truncated or foreign files are rejected") {
  const std::string path = temp_path("bad.hgdb");
  store(compile(read_fixture("sum.mh"), "sum.mh", OptLevel::kDebug).symbols, path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  CHECK_THROWS_AS(load(path), Error);
  {
    std::ofstream out(path, std::ios::trunc);
    out << "not a database";
  }
  CHECK_THROWS_AS(load(path), Error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load(path), Error);
}

TEST_CASE("SQL provider answers like the in-memory table") {
  const std::string path = temp_path("eq.hgdb");
  const SymbolTable t = compile(kTwoInstances, "two.mh", OptLevel::kDebug).symbols;
  store(t, path);
  const SqlSymbolSource sql(path);
  for (uint32_t line = 0; line < 20; ++line) {
    CHECK(sql.breakpoints_at("two.mh", line, std::nullopt) ==
          t.breakpoints_at("two.mh", line, std::nullopt));
    CHECK(sql.breakpoints_at("two.mh", line, 5) == t.breakpoints_at("two.mh", line, 5));
  }
  for (const auto& bp : t.breakpoints) {
    CHECK(sql.scope_of(bp.id) == t.scope_of(bp.id));
    for (const auto& [name, var] : t.scope_of(bp.id)) {
      CHECK(sql.resolve_scoped(bp.id, name) == t.resolve_scoped(bp.id, name));
    }
    CHECK(sql.resolve_scoped(bp.id, "io.k") == t.resolve_scoped(bp.id, "io.k"));
  }
  for (const auto& inst : t.instances) {
    CHECK(sql.instance_variables(inst.id) == t.instance_variables(inst.id));
    CHECK_THROWS_AS(sql.resolve_instance(inst.id, "missing"), Error);
  }
  CHECK_THROWS_AS(sql.scope_of(999), Error);
  CHECK_THROWS_AS(t.scope_of(999), Error);
  std::filesystem::remove(path);
}

TEST_CASE("relational invariants") {
  const SymbolTable t = compile(kTwoInstances, "two.mh", OptLevel::kDebug).symbols;
  t.validate();
  // Filter-join oracle for breakpoints_at over the raw rows.
  for (uint32_t line = 0; line < 20; ++line) {
    std::vector<BreakpointRow> expect;
    for (const auto& b : t.breakpoints) {
      if (b.file == "two.mh" && b.line == line) expect.push_back(b);
    }
    std::sort(expect.begin(), expect.end(),
              [](const auto& x, const auto& y) { return x.order_index < y.order_index; });
    CHECK(t.breakpoints_at("two.mh", line, std::nullopt) == expect);
  }
  CHECK(t.resolve_instance(t.instance_by_name("top.b")->id, "io.k") == "top.b.io_k");
  CHECK(t.match_file("two.mh") == std::optional<std::string>("two.mh"));
  CHECK_FALSE(t.match_file("other.mh").has_value());

  SymbolTable broken = t;
  broken.scope_variables.push_back(ScopeVariableRow{12345, 1, "ghost"});
  CHECK_THROWS_AS(broken.validate(), Error);
}
