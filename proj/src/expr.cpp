#include "hwdbg/expr.hpp"

#include <algorithm>

namespace hwdbg {

Expr Expr::literal(uint64_t value, TextPos pos) {
  Expr e;
  e.kind = Kind::kLiteral;
  e.value = value;
  e.width = bit_length(value);
  e.pos = pos;
  return e;
}

Expr Expr::ident(std::string name, TextPos pos) {
  Expr e;
  e.kind = Kind::kIdent;
  e.name = std::move(name);
  e.pos = pos;
  return e;
}

Expr Expr::indexed_ident(std::string name, Expr index, TextPos pos) {
  Expr e = ident(std::move(name), pos);
  e.indexed = true;
  e.args.push_back(std::move(index));
  return e;
}

Expr Expr::unary(UnaryOp op, Expr operand, TextPos pos) {
  Expr e;
  e.kind = Kind::kUnary;
  e.unary_op = op;
  e.pos = pos;
  e.args.push_back(std::move(operand));
  return e;
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs, TextPos pos) {
  Expr e;
  e.kind = Kind::kBinary;
  e.binary_op = op;
  e.pos = pos;
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  return e;
}

Expr Expr::ternary(Expr cond, Expr then_expr, Expr else_expr, TextPos pos) {
  Expr e;
  e.kind = Kind::kTernary;
  e.pos = pos;
  e.args.push_back(std::move(cond));
  e.args.push_back(std::move(then_expr));
  e.args.push_back(std::move(else_expr));
  return e;
}

bool Expr::same_as(const Expr& other) const {
  if (kind != other.kind || args.size() != other.args.size()) return false;
  switch (kind) {
    case Kind::kLiteral:
      if (value != other.value || width != other.width) return false;
      break;
    case Kind::kIdent:
      if (name != other.name || indexed != other.indexed) return false;
      break;
    case Kind::kUnary:
      if (unary_op != other.unary_op) return false;
      break;
    case Kind::kBinary:
      if (binary_op != other.binary_op) return false;
      break;
    case Kind::kTernary:
      break;
  }
  for (size_t i = 0; i < args.size(); ++i) {
    if (!args[i].same_as(other.args[i])) return false;
  }
  return true;
}

namespace {

struct BinaryLevel {
  std::string_view token;
  BinaryOp op;
  int precedence;
};

// Higher binds tighter.
constexpr BinaryLevel kBinaryOps[] = {
    {"||", BinaryOp::kLogicalOr, 1}, {"&&", BinaryOp::kLogicalAnd, 2},
    {"|", BinaryOp::kOr, 3},         {"^", BinaryOp::kXor, 4},
    {"&", BinaryOp::kAnd, 5},        {"==", BinaryOp::kEq, 6},
    {"!=", BinaryOp::kNe, 6},        {"<", BinaryOp::kLt, 7},
    {"<=", BinaryOp::kLe, 7},        {">", BinaryOp::kGt, 7},
    {">=", BinaryOp::kGe, 7},        {"<<", BinaryOp::kShl, 8},
    {">>", BinaryOp::kShr, 8},       {"+", BinaryOp::kAdd, 9},
    {"-", BinaryOp::kSub, 9},        {"*", BinaryOp::kMul, 10},
    {"/", BinaryOp::kDiv, 10},       {"%", BinaryOp::kMod, 10},
};

const BinaryLevel* binary_at(const TokenStream& ts) {
  const Token& t = ts.peek();
  if (t.kind != TokenKind::kPunct) return nullptr;
  for (const auto& level : kBinaryOps) {
    if (t.text == level.token) return &level;
  }
  return nullptr;
}

Expr parse_ternary(TokenStream& ts);

Expr parse_primary(TokenStream& ts) {
  const Token& t = ts.peek();
  if (t.kind == TokenKind::kNumber) {
    ts.next();
    return Expr::literal(*parse_uint(t.text), t.pos);
  }
  if (t.kind == TokenKind::kIdent) {
    const TextPos pos = t.pos;
    std::string name = ts.next().text;
    while (ts.is_punct(".") && ts.peek(1).kind == TokenKind::kIdent) {
      ts.next();
      name += "." + ts.next().text;
    }
    if (ts.accept_punct("[")) {
      Expr index = parse_ternary(ts);
      ts.expect_punct("]");
      return Expr::indexed_ident(std::move(name), std::move(index), pos);
    }
    return Expr::ident(std::move(name), pos);
  }
  if (ts.accept_punct("(")) {
    Expr inner = parse_ternary(ts);
    ts.expect_punct(")");
    return inner;
  }
  if (t.kind == TokenKind::kEnd) ts.fail(t, "expected expression but found end of input");
  ts.fail(t, "expected expression but found '" + t.text + "'");
}

Expr parse_unary(TokenStream& ts) {
  const Token& t = ts.peek();
  if (t.kind == TokenKind::kPunct) {
    const TextPos pos = t.pos;
    if (ts.accept_punct("~")) return Expr::unary(UnaryOp::kNot, parse_unary(ts), pos);
    if (ts.accept_punct("!")) return Expr::unary(UnaryOp::kLogicalNot, parse_unary(ts), pos);
    if (ts.accept_punct("-")) return Expr::unary(UnaryOp::kNeg, parse_unary(ts), pos);
  }
  return parse_primary(ts);
}

Expr parse_binary(TokenStream& ts, int min_precedence) {
  Expr lhs = parse_unary(ts);
  while (const BinaryLevel* level = binary_at(ts)) {
    if (level->precedence < min_precedence) break;
    const TextPos pos = ts.next().pos;
    Expr rhs = parse_binary(ts, level->precedence + 1);
    lhs = Expr::binary(level->op, std::move(lhs), std::move(rhs), pos);
  }
  return lhs;
}

Expr parse_ternary(TokenStream& ts) {
  Expr cond = parse_binary(ts, 1);
  if (ts.is_punct("?")) {
    const TextPos pos = ts.next().pos;
    Expr then_expr = parse_ternary(ts);
    ts.expect_punct(":");
    Expr else_expr = parse_ternary(ts);
    return Expr::ternary(std::move(cond), std::move(then_expr), std::move(else_expr), pos);
  }
  return cond;
}

bool is_atom(const Expr& e) {
  return e.kind == Expr::Kind::kLiteral || e.kind == Expr::Kind::kIdent;
}

void print(const Expr& e, std::string& out);

void print_operand(const Expr& e, std::string& out) {
  if (is_atom(e) || e.kind == Expr::Kind::kUnary) {
    print(e, out);
  } else {
    out += '(';
    print(e, out);
    out += ')';
  }
}

void print(const Expr& e, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::kLiteral:
      out += std::to_string(e.value);
      break;
    case Expr::Kind::kIdent:
      out += e.name;
      if (e.indexed) {
        out += '[';
        print(e.args[0], out);
        out += ']';
      }
      break;
    case Expr::Kind::kUnary:
      out += op_text(e.unary_op);
      print_operand(e.args[0], out);
      break;
    case Expr::Kind::kBinary:
      print_operand(e.args[0], out);
      out += ' ';
      out += op_text(e.binary_op);
      out += ' ';
      print_operand(e.args[1], out);
      break;
    case Expr::Kind::kTernary:
      print_operand(e.args[0], out);
      out += " ? ";
      print_operand(e.args[1], out);
      out += " : ";
      print_operand(e.args[2], out);
      break;
  }
}

std::string lookup_name(const Expr& e, const ValueLookup& lookup) {
  if (!e.indexed) return e.name;
  const Value index = eval(e.args[0], lookup);
  if (!index.known) throw ExprError("index of '" + e.name + "' is unknown");
  return element_name(e.name, index.bits);
}

void collect_names(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == Expr::Kind::kIdent) {
    std::string name = e.name;
    if (e.indexed) {
      if (e.args[0].kind == Expr::Kind::kLiteral) {
        name = element_name(e.name, e.args[0].value);
      } else {
        collect_names(e.args[0], out);
      }
    }
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    return;
  }
  for (const auto& a : e.args) collect_names(a, out);
}

Value eval_unary(UnaryOp op, const Value& a) {
  const uint32_t width = result_width(op, a.width);
  if (!a.known) return Value::unknown(width);
  return Value::make(apply(op, a.bits, width), width);
}

Value eval_binary(BinaryOp op, const Value& a, const Value& b) {
  const uint32_t width = result_width(op, a.width, b.width);
  if (!a.known || !b.known) return Value::unknown(width);
  if ((op == BinaryOp::kDiv || op == BinaryOp::kMod) && b.bits == 0) {
    return Value::unknown(width);
  }
  return Value::make(apply(op, a.bits, b.bits, width), width);
}

Value eval_select(const Value& c, const Value& t, const Value& f) {
  const uint32_t width = std::max(t.width, f.width);
  if (!c.known || !t.known || !f.known) return Value::unknown(width);
  return Value::make(c.bits != 0 ? t.bits : f.bits, width);
}

}  // namespace

Expr parse_expr(TokenStream& tokens) { return parse_ternary(tokens); }

Expr parse_expr(std::string_view text, const std::string& file) {
  TokenStream ts(tokenize(text, file), file);
  Expr e = parse_ternary(ts);
  if (!ts.at_end()) ts.fail(ts.peek(), "unexpected '" + ts.peek().text + "' after expression");
  return e;
}

std::string to_string(const Expr& expr) {
  std::string out;
  print(expr, out);
  return out;
}

std::string element_name(std::string_view base, uint64_t index) {
  return std::string(base) + "[" + std::to_string(index) + "]";
}

Value eval(const Expr& expr, const ValueLookup& lookup) {
  switch (expr.kind) {
    case Expr::Kind::kLiteral:
      return Value::make(expr.value, expr.width);
    case Expr::Kind::kIdent: {
      const std::string name = lookup_name(expr, lookup);
      auto v = lookup(name);
      if (!v) throw ExprError("unresolved identifier '" + name + "'");
      return *v;
    }
    case Expr::Kind::kUnary:
      return eval_unary(expr.unary_op, eval(expr.args[0], lookup));
    case Expr::Kind::kBinary: {
      const Value a = eval(expr.args[0], lookup);
      const Value b = eval(expr.args[1], lookup);
      return eval_binary(expr.binary_op, a, b);
    }
    case Expr::Kind::kTernary: {
      const Value c = eval(expr.args[0], lookup);
      const Value t = eval(expr.args[1], lookup);
      const Value f = eval(expr.args[2], lookup);
      return eval_select(c, t, f);
    }
  }
  return Value::unknown(1);
}

bool truthy(const Value& v) { return v.known && v.bits != 0; }

std::vector<std::string> referenced_names(const Expr& expr) {
  std::vector<std::string> out;
  collect_names(expr, out);
  return out;
}

BoundExpr BoundExpr::bind(const Expr& expr, const Resolver& resolve) {
  BoundExpr out;
  std::function<void(const Expr&)> emit = [&](const Expr& e) {
    Instr ins{};
    switch (e.kind) {
      case Expr::Kind::kLiteral:
        ins.op = Instr::Op::kConst;
        ins.constant = Value::make(e.value, e.width);
        break;
      case Expr::Kind::kIdent: {
        std::string name = e.name;
        if (e.indexed) {
          if (e.args[0].kind != Expr::Kind::kLiteral) {
            throw ExprError("index of '" + e.name + "' must be an integer constant");
          }
          name = element_name(e.name, e.args[0].value);
        }
        auto slot = resolve(name);
        if (!slot) throw ExprError("unresolved identifier '" + name + "'");
        ins.op = Instr::Op::kLoad;
        ins.slot = *slot;
        break;
      }
      case Expr::Kind::kUnary:
        emit(e.args[0]);
        ins.op = Instr::Op::kUnary;
        ins.unary_op = e.unary_op;
        break;
      case Expr::Kind::kBinary:
        emit(e.args[0]);
        emit(e.args[1]);
        ins.op = Instr::Op::kBinary;
        ins.binary_op = e.binary_op;
        break;
      case Expr::Kind::kTernary:
        emit(e.args[0]);
        emit(e.args[1]);
        emit(e.args[2]);
        ins.op = Instr::Op::kSelect;
        break;
    }
    out.code_.push_back(ins);
  };
  emit(expr);
  return out;
}

Value BoundExpr::eval(const Fetch& fetch) const {
  std::vector<Value> stack;
  stack.reserve(code_.size());
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case Instr::Op::kConst:
        stack.push_back(ins.constant);
        break;
      case Instr::Op::kLoad:
        stack.push_back(fetch(ins.slot));
        break;
      case Instr::Op::kUnary:
        stack.back() = eval_unary(ins.unary_op, stack.back());
        break;
      case Instr::Op::kBinary: {
        const Value b = stack.back();
        stack.pop_back();
        stack.back() = eval_binary(ins.binary_op, stack.back(), b);
        break;
      }
      case Instr::Op::kSelect: {
        const Value f = stack.back();
        stack.pop_back();
        const Value t = stack.back();
        stack.pop_back();
        stack.back() = eval_select(stack.back(), t, f);
        break;
      }
    }
  }
  return stack.empty() ? Value::unknown(1) : stack.back();
}

std::optional<Value> BoundExpr::constant_value() const {
  if (code_.size() == 1 && code_[0].op == Instr::Op::kConst) return code_[0].constant;
  return std::nullopt;
}

}  // namespace hwdbg
