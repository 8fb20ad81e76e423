#include <map>

#include "doctest.h"
#include "hwdbg/expr.hpp"

using namespace hwdbg;

namespace {

Value ev(const std::string& text, const std::map<std::string, Value>& vars = {}) {
  return eval(parse_expr(text), [&](std::string_view n) -> std::optional<Value> {
    auto it = vars.find(std::string(n));
    if (it == vars.end()) return std::nullopt;
    return it->second;
  });
}

}  // namespace

TEST_CASE("literal widths follow bit length") {
  CHECK(ev("0") == Value::make(0, 1));
  CHECK(ev("5") == Value::make(5, 3));
  CHECK(ev("0x100") == Value::make(256, 9));
}

TEST_CASE("precedence matches C") {
  // Oracle: the same expressions evaluated with host integer arithmetic over
  // 16-bit operands, wide enough that nothing wraps.
  const std::map<std::string, Value> v{{"a", Value::make(1, 16)}, {"b", Value::make(2, 16)},
                                       {"c", Value::make(3, 16)}, {"g", Value::make(7, 16)}};
  CHECK(ev("a + b * c", v).bits == 1 + 2 * 3);
  CHECK(ev("(a + b) * c", v).bits == (1 + 2) * 3);
  CHECK(ev("g - b - a", v).bits == 7 - 2 - 1);
  CHECK(ev("a | b & c", v).bits == (1 | (2 & 3)));
  CHECK(ev("a << b + a", v).bits == (1u << (2 + 1)));
  CHECK(ev("c == c && b < a", v).bits == 0);
  CHECK(ev("0 ? g : a ? b : c", v).bits == 2);
}

TEST_CASE("literal-only arithmetic wraps at literal widths") {
  // 2 * 3 is computed at width 2.
  CHECK(ev("1 + 2 * 3") == Value::make((1 + (2 * 3) % 4) % 4, 2));
}

TEST_CASE("arithmetic wraps at the wider operand width") {
  const std::map<std::string, Value> vars{{"a", Value::make(250, 8)}, {"b", Value::make(10, 8)}};
  CHECK(ev("a + b", vars) == Value::make((250 + 10) % 256, 8));
  CHECK(ev("b - a", vars) == Value::make((10 - 250 + 256) % 256, 8));
  CHECK(ev("a > b", vars) == Value::make(1, 1));
  CHECK(ev("~b", vars) == Value::make(0xff ^ 10, 8));
  CHECK(ev("-b", vars) == Value::make(256 - 10, 8));
}

TEST_CASE("unknown operands and division by zero give unknown") {
  const std::map<std::string, Value> vars{{"x", Value::unknown(4)}, {"z", Value::make(0, 4)}};
  CHECK_FALSE(ev("x + 1", vars).known);
  CHECK_FALSE(ev("1 || x", vars).known);
  CHECK_FALSE(ev("7 / z", vars).known);
  CHECK_FALSE(ev("7 % z", vars).known);
  CHECK_FALSE(truthy(ev("x", vars)));
  CHECK(truthy(ev("z + 1", vars)));
}

TEST_CASE("unresolved names are errors") {
  CHECK_THROWS_AS(ev("nope + 1"), ExprError);
  CHECK_THROWS_AS(parse_expr("1 +"), SyntaxError);
  CHECK_THROWS_AS(parse_expr("(1"), SyntaxError);
}

TEST_CASE("dotted and indexed identifiers") {
  const std::map<std::string, Value> vars{{"io.a", Value::make(3, 4)},
                                          {"data[1]", Value::make(9, 8)}};
  CHECK(ev("io.a + data[1]", vars).bits == 12);
  CHECK(referenced_names(parse_expr("io.a + data[1] * io.a")) ==
        std::vector<std::string>{"io.a", "data[1]"});
}

TEST_CASE("to_string round-trips") {
  for (const char* text : {"a + b * c", "(a + b) * c", "!(a && b) || c[2]", "a ? b : c ? d : e",
                           "~-a", "a - (b - c)", "x.y << 3 >> 1"}) {
    const Expr e = parse_expr(text);
    CHECK(parse_expr(to_string(e)).same_as(e));
  }
}

TEST_CASE("bound expressions agree with tree evaluation") {
  const Expr e = parse_expr("(a * 3 + b) % 7 == 2 ? a : b ^ 5");
  const std::vector<std::string> names{"a", "b"};
  const BoundExpr bound = BoundExpr::bind(e, [&](std::string_view n) -> std::optional<size_t> {
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == n) return i;
    }
    return std::nullopt;
  });
  for (uint64_t a = 0; a < 16; ++a) {
    for (uint64_t b = 0; b < 16; ++b) {
      const std::vector<Value> slots{Value::make(a, 4), Value::make(b, 4)};
      const Value tree = ev(to_string(e), {{"a", slots[0]}, {"b", slots[1]}});
      CHECK(bound.eval([&](size_t i) { return slots[i]; }) == tree);
    }
  }
  CHECK(BoundExpr::bind(parse_expr("3"), [](std::string_view) { return std::nullopt; })
            .constant_value() == Value::make(3, 2));
}
