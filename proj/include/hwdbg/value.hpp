#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hwdbg {

inline constexpr uint32_t kMaxWidth = 64;

// Base class for every error the library reports to callers.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unsigned bit-vector value, 1..64 bits wide. Unknown values come from x/z in
// traces and from division by zero in debugger expressions.
struct Value {
  uint32_t width = 1;
  uint64_t bits = 0;
  bool known = true;

  static Value make(uint64_t bits, uint32_t width);
  static Value unknown(uint32_t width);

  bool operator==(const Value&) const = default;

  // Decimal string, or "x" when unknown.
  std::string to_string() const;
};

uint64_t width_mask(uint32_t width);

// Number of bits needed to hold `v`, at least 1. This is the width of an
// unsized literal.
uint32_t bit_length(uint64_t v);

enum class UnaryOp { kNot, kLogicalNot, kNeg };
enum class BinaryOp {
  kAdd, kSub, kMul, kDiv, kMod,
  kAnd, kOr, kXor, kShl, kShr,
  kEq, kNe, kLt, kLe, kGt, kGe,
  kLogicalAnd, kLogicalOr,
};

std::string_view op_text(UnaryOp op);
std::string_view op_text(BinaryOp op);

bool is_predicate(BinaryOp op);

// Width of a binary result given operand widths.
uint32_t result_width(BinaryOp op, uint32_t lhs, uint32_t rhs);
uint32_t result_width(UnaryOp op, uint32_t operand);

// Two-valued operator semantics shared by the design language, the netlist
// simulator and the debugger expression evaluator. Division by zero follows
// the design-language convention: x / 0 = all ones, x % 0 = x.
uint64_t apply(UnaryOp op, uint64_t a, uint32_t width);
uint64_t apply(BinaryOp op, uint64_t a, uint64_t b, uint32_t width);

// Parses a decimal or 0x-prefixed hexadecimal integer. Returns nullopt on
// malformed text or overflow.
std::optional<uint64_t> parse_uint(std::string_view text);

}  // namespace hwdbg
