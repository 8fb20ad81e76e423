#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hwdbg/lexer.hpp"
#include "hwdbg/value.hpp"

namespace hwdbg {

// Expression tree used both by the hardware language and by debugger
// conditions. Identifiers are `.`-separated paths with an optional index.
struct Expr {
  enum class Kind { kLiteral, kIdent, kUnary, kBinary, kTernary };

  Kind kind = Kind::kLiteral;
  TextPos pos;
  // kLiteral
  uint64_t value = 0;
  uint32_t width = 1;
  // kIdent
  std::string name;
  bool indexed = false;
  // kUnary / kBinary
  UnaryOp unary_op = UnaryOp::kNot;
  BinaryOp binary_op = BinaryOp::kAdd;
  // Index for kIdent, operands otherwise.
  std::vector<Expr> args;

  static Expr literal(uint64_t value, TextPos pos = {});
  static Expr ident(std::string name, TextPos pos = {});
  static Expr indexed_ident(std::string name, Expr index, TextPos pos = {});
  static Expr unary(UnaryOp op, Expr operand, TextPos pos = {});
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs, TextPos pos = {});
  static Expr ternary(Expr cond, Expr then_expr, Expr else_expr, TextPos pos = {});

  // Structural equality, ignoring positions.
  bool same_as(const Expr& other) const;
};

class ExprError : public Error {
 public:
  using Error::Error;
};

// Parses a whole string as one expression.
Expr parse_expr(std::string_view text, const std::string& file = "<expr>");

// Parses one expression from a token stream, leaving the cursor after it.
Expr parse_expr(TokenStream& tokens);

// Canonical text; parses back to a structurally equal tree.
std::string to_string(const Expr& expr);

// Name passed to lookups for an identifier: `a.b` or `data[3]`.
std::string element_name(std::string_view base, uint64_t index);

using ValueLookup = std::function<std::optional<Value>(std::string_view)>;

// Strict evaluation: every operand is evaluated, and any unknown operand
// makes the result unknown. Division or modulo by zero yields unknown.
// Throws ExprError for identifiers the lookup cannot resolve and for
// indices that are not known constants.
Value eval(const Expr& expr, const ValueLookup& lookup);

// True iff the value is known and nonzero.
bool truthy(const Value& v);

// Every identifier referenced by the expression, in first-use order, with
// indices folded to `name[k]`.
std::vector<std::string> referenced_names(const Expr& expr);

// Expression compiled against a slot resolver so it can be evaluated
// repeatedly without name lookups.
class BoundExpr {
 public:
  using Resolver = std::function<std::optional<size_t>(std::string_view)>;
  using Fetch = std::function<Value(size_t)>;

  BoundExpr() = default;
  static BoundExpr bind(const Expr& expr, const Resolver& resolve);

  Value eval(const Fetch& fetch) const;
  bool empty() const { return code_.empty(); }
  // True when the program is a single literal; `constant_value` is then set.
  std::optional<Value> constant_value() const;

 private:
  struct Instr {
    enum class Op { kConst, kLoad, kUnary, kBinary, kSelect } op;
    Value constant;
    size_t slot = 0;
    UnaryOp unary_op = UnaryOp::kNot;
    BinaryOp binary_op = BinaryOp::kAdd;
  };
  std::vector<Instr> code_;
};

}  // namespace hwdbg
