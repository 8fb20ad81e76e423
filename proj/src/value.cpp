#include "hwdbg/value.hpp"

#include <bit>
#include <charconv>

namespace hwdbg {

uint64_t width_mask(uint32_t width) {
  return width >= 64 ? ~uint64_t{0} : ((uint64_t{1} << width) - 1);
}

uint32_t bit_length(uint64_t v) {
  return v == 0 ? 1 : static_cast<uint32_t>(std::bit_width(v));
}

Value Value::make(uint64_t bits, uint32_t width) {
  return Value{width, bits & width_mask(width), true};
}

Value Value::unknown(uint32_t width) { return Value{width, 0, false}; }

std::string Value::to_string() const {
  return known ? std::to_string(bits) : std::string("x");
}

std::string_view op_text(UnaryOp op) {
  switch (op) {
    case UnaryOp::kNot: return "~";
    case UnaryOp::kLogicalNot: return "!";
    case UnaryOp::kNeg: return "-";
  }
  return "?";
}

std::string_view op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return "+";
    case BinaryOp::kSub: return "-";
    case BinaryOp::kMul: return "*";
    case BinaryOp::kDiv: return "/";
    case BinaryOp::kMod: return "%";
    case BinaryOp::kAnd: return "&";
    case BinaryOp::kOr: return "|";
    case BinaryOp::kXor: return "^";
    case BinaryOp::kShl: return "<<";
    case BinaryOp::kShr: return ">>";
    case BinaryOp::kEq: return "==";
    case BinaryOp::kNe: return "!=";
    case BinaryOp::kLt: return "<";
    case BinaryOp::kLe: return "<=";
    case BinaryOp::kGt: return ">";
    case BinaryOp::kGe: return ">=";
    case BinaryOp::kLogicalAnd: return "&&";
    case BinaryOp::kLogicalOr: return "||";
  }
  return "?";
}

bool is_predicate(BinaryOp op) {
  switch (op) {
    case BinaryOp::kEq:
    case BinaryOp::kNe:
    case BinaryOp::kLt:
    case BinaryOp::kLe:
    case BinaryOp::kGt:
    case BinaryOp::kGe:
    case BinaryOp::kLogicalAnd:
    case BinaryOp::kLogicalOr:
      return true;
    default:
      return false;
  }
}

uint32_t result_width(BinaryOp op, uint32_t lhs, uint32_t rhs) {
  if (is_predicate(op)) return 1;
  if (op == BinaryOp::kShl || op == BinaryOp::kShr) return lhs;
  return lhs > rhs ? lhs : rhs;
}

uint32_t result_width(UnaryOp op, uint32_t operand) {
  return op == UnaryOp::kLogicalNot ? 1 : operand;
}

uint64_t apply(UnaryOp op, uint64_t a, uint32_t width) {
  switch (op) {
    case UnaryOp::kNot: return ~a & width_mask(width);
    case UnaryOp::kLogicalNot: return a == 0 ? 1 : 0;
    case UnaryOp::kNeg: return (~a + 1) & width_mask(width);
  }
  return 0;
}

uint64_t apply(BinaryOp op, uint64_t a, uint64_t b, uint32_t width) {
  const uint64_t mask = width_mask(width);
  switch (op) {
    case BinaryOp::kAdd: return (a + b) & mask;
    case BinaryOp::kSub: return (a - b) & mask;
    case BinaryOp::kMul: return (a * b) & mask;
    case BinaryOp::kDiv: return b == 0 ? mask : (a / b) & mask;
    case BinaryOp::kMod: return b == 0 ? a & mask : (a % b) & mask;
    case BinaryOp::kAnd: return a & b & mask;
    case BinaryOp::kOr: return (a | b) & mask;
    case BinaryOp::kXor: return (a ^ b) & mask;
    case BinaryOp::kShl: return b >= 64 ? 0 : (a << b) & mask;
    case BinaryOp::kShr: return b >= 64 ? 0 : (a >> b) & mask;
    case BinaryOp::kEq: return a == b;
    case BinaryOp::kNe: return a != b;
    case BinaryOp::kLt: return a < b;
    case BinaryOp::kLe: return a <= b;
    case BinaryOp::kGt: return a > b;
    case BinaryOp::kGe: return a >= b;
    case BinaryOp::kLogicalAnd: return a != 0 && b != 0;
    case BinaryOp::kLogicalOr: return a != 0 || b != 0;
  }
  return 0;
}

std::optional<uint64_t> parse_uint(std::string_view text) {
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    base = 16;
    text.remove_prefix(2);
  }
  if (text.empty()) return std::nullopt;
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out, base);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return out;
}

}  // namespace hwdbg
