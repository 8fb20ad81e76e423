#include "hwdbg/frontend.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

namespace hwdbg {

std::string normalize_path(std::string_view path) {
  std::string out(path);
  std::replace(out.begin(), out.end(), '\\', '/');
  return out;
}

std::string_view to_string(VarKind kind) {
  switch (kind) {
    case VarKind::kClock: return "clock";
    case VarKind::kInput: return "input";
    case VarKind::kOutput: return "output";
    case VarKind::kWire: return "wire";
    case VarKind::kReg: return "reg";
  }
  return "?";
}

std::string VarDecl::element(uint32_t index) const {
  return is_array() ? element_name(name, index) : name;
}

std::string VarDecl::rtl_element(uint32_t index) const {
  std::string base = name;
  std::replace(base.begin(), base.end(), '.', '_');
  return is_array() ? base + "_" + std::to_string(index) : base;
}

const VarDecl* ModuleDef::find_var(std::string_view n) const {
  for (const auto& v : vars) {
    if (v.name == n) return &v;
  }
  return nullptr;
}

const InstanceDecl* ModuleDef::find_instance(std::string_view n) const {
  for (const auto& i : instances) {
    if (i.name == n) return &i;
  }
  return nullptr;
}

const ModuleDef* SourceProgram::find_module(std::string_view n) const {
  for (const auto& m : modules) {
    if (m.name == n) return &m;
  }
  return nullptr;
}

const ModuleDef& SourceProgram::top_module() const {
  const ModuleDef* m = find_module(top);
  if (m == nullptr) throw Error("program has no top module");
  return *m;
}

void for_each_stmt(const SourceProgram& program, const std::function<void(const Stmt&)>& fn) {
  std::function<void(const std::vector<Stmt>&)> walk = [&](const std::vector<Stmt>& stmts) {
    for (const auto& s : stmts) {
      fn(s);
      walk(s.then_body);
      walk(s.else_body);
      walk(s.body);
    }
  };
  for (const auto& m : program.modules) {
    for (const auto& b : m.blocks) walk(b.body);
  }
}

std::optional<uint64_t> loop_value(const LoopEnv& env, std::string_view name) {
  for (auto it = env.rbegin(); it != env.rend(); ++it) {
    if (it->first == name) return it->second;
  }
  return std::nullopt;
}

Value loop_var_value(uint64_t v) { return Value::make(v, bit_length(v)); }

namespace {

[[noreturn]] void fail_at(const std::string& file, TextPos pos, const std::string& message) {
  throw SyntaxError(file, pos, message);
}

[[noreturn]] void fail_at(const SourceLoc& loc, const std::string& message) {
  throw SyntaxError(loc.file, TextPos{loc.line, loc.column}, message);
}

}  // namespace

uint64_t eval_constant(const Expr& expr, const LoopEnv& env, const std::string& file) {
  const Value v = eval(expr, [&](std::string_view name) -> std::optional<Value> {
    if (auto lv = loop_value(env, name)) return loop_var_value(*lv);
    fail_at(file, expr.pos, "'" + std::string(name) + "' is not a constant");
  });
  return v.bits;
}

ElementRef resolve_element(const ModuleDef& module, const Expr& ident, const LoopEnv& env,
                           const std::string& file) {
  if (ident.kind != Expr::Kind::kIdent) fail_at(file, ident.pos, "expected a variable");
  const VarDecl* decl = module.find_var(ident.name);
  if (decl == nullptr) fail_at(file, ident.pos, "unknown name '" + ident.name + "'");
  if (decl->is_array() != ident.indexed) {
    fail_at(file, ident.pos,
            decl->is_array() ? "array '" + ident.name + "' must be indexed"
                             : "'" + ident.name + "' is not an array");
  }
  uint32_t index = 0;
  if (ident.indexed) {
    const uint64_t k = eval_constant(ident.args[0], env, file);
    if (k >= decl->array_size) {
      fail_at(file, ident.pos,
              "index " + std::to_string(k) + " out of range for '" + ident.name + "'");
    }
    index = static_cast<uint32_t>(k);
  }
  return ElementRef{decl, index};
}

namespace {

// Walks every identifier read by an expression under a loop environment.
void for_each_read(const ModuleDef& module, const Expr& e, const LoopEnv& env,
                   const std::string& file, const std::function<void(const ElementRef&)>& fn) {
  switch (e.kind) {
    case Expr::Kind::kLiteral:
      return;
    case Expr::Kind::kIdent:
      if (!e.indexed && loop_value(env, e.name)) return;
      fn(resolve_element(module, e, env, file));
      return;
    default:
      for (const auto& a : e.args) for_each_read(module, a, env, file, fn);
  }
}

// Unrolled walk: calls `fn` for every statement occurrence with its loop
// environment, visiting both branches of every if.
void walk_unrolled(const std::vector<Stmt>& stmts, LoopEnv& env,
                   const std::function<void(const Stmt&, const LoopEnv&)>& fn) {
  for (const auto& s : stmts) {
    fn(s, env);
    switch (s.kind) {
      case Stmt::Kind::kAssign:
        break;
      case Stmt::Kind::kIf:
        walk_unrolled(s.then_body, env, fn);
        walk_unrolled(s.else_body, env, fn);
        break;
      case Stmt::Kind::kFor:
        for (uint64_t i = s.lo; i < s.hi; ++i) {
          env.emplace_back(s.loop_var, i);
          walk_unrolled(s.body, env, fn);
          env.pop_back();
        }
        break;
      case Stmt::Kind::kBlock:
        walk_unrolled(s.body, env, fn);
        break;
    }
  }
}

}  // namespace

std::vector<std::string> block_scope_elements(const ModuleDef& module, const Block& block,
                                              const std::string& file) {
  std::set<std::pair<const VarDecl*, uint32_t>> seen;
  LoopEnv env;
  walk_unrolled(block.body, env, [&](const Stmt& s, const LoopEnv& e) {
    auto add = [&](const ElementRef& r) { seen.emplace(r.decl, r.index); };
    if (s.kind == Stmt::Kind::kAssign) {
      add(resolve_element(module, s.target, e, file));
      for_each_read(module, s.value, e, file, add);
    } else if (s.kind == Stmt::Kind::kIf) {
      for_each_read(module, s.cond, e, file, add);
    }
  });
  std::vector<std::string> out;
  for (const auto& v : module.vars) {
    for (uint32_t i = 0; i < v.element_count(); ++i) {
      if (seen.count({&v, i})) out.push_back(v.element(i));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

const std::set<std::string, std::less<>> kKeywords = {
    "module", "clock", "input", "output", "wire", "reg", "comb", "seq",
    "inst",   "if",    "else",  "for",    "in",   "reset"};

class Parser {
 public:
  Parser(std::string_view text, std::string file)
      : file_(std::move(file)), ts_(tokenize(text, file_), file_) {}

  SourceProgram parse_program() {
    SourceProgram program;
    program.file = file_;
    while (!ts_.at_end()) {
      if (!ts_.is_ident("module")) ts_.fail(ts_.peek(), "expected 'module'");
      program.modules.push_back(parse_module());
    }
    return program;
  }

 private:
  SourceLoc loc(const Token& t) const { return SourceLoc{file_, t.pos.line, t.pos.column}; }

  std::string parse_name(std::string_view what) {
    const Token& first = ts_.expect_ident(what);
    check_not_keyword(first);
    std::string name = first.text;
    while (ts_.is_punct(".") && ts_.peek(1).kind == TokenKind::kIdent) {
      ts_.next();
      const Token& part = ts_.next();
      check_not_keyword(part);
      name += "." + part.text;
    }
    return name;
  }

  void check_not_keyword(const Token& t) {
    if (kKeywords.count(t.text)) ts_.fail(t, "'" + t.text + "' is a reserved word");
    if (t.text.find("__") != std::string::npos) {
      ts_.fail(t, "identifiers may not contain '__' ('" + t.text + "')");
    }
  }

  ModuleDef parse_module() {
    const Token& kw = ts_.expect_ident_word("module");
    ModuleDef m;
    m.loc = loc(kw);
    const Token& name = ts_.expect_ident("module name");
    check_not_keyword(name);
    m.name = name.text;
    ts_.expect_punct("{");
    while (!ts_.accept_punct("}")) {
      if (ts_.at_end()) ts_.fail(ts_.peek(), "unterminated module '" + m.name + "'");
      parse_item(m);
    }
    return m;
  }

  void parse_item(ModuleDef& m) {
    const Token& kw = ts_.peek();
    if (ts_.accept_ident("clock")) {
      VarDecl v;
      v.loc = loc(kw);
      v.kind = VarKind::kClock;
      v.name = parse_name("clock name");
      v.width = 1;
      ts_.expect_punct(";");
      m.vars.push_back(std::move(v));
    } else if (ts_.is_ident("input") || ts_.is_ident("output") || ts_.is_ident("wire") ||
               ts_.is_ident("reg")) {
      m.vars.push_back(parse_decl());
    } else if (ts_.accept_ident("comb")) {
      Block b;
      b.kind = Block::Kind::kComb;
      b.loc = loc(kw);
      b.body = parse_body();
      m.blocks.push_back(std::move(b));
    } else if (ts_.accept_ident("seq")) {
      Block b;
      b.kind = Block::Kind::kSeq;
      b.loc = loc(kw);
      ts_.expect_punct("@");
      b.clock = parse_name("clock name");
      b.body = parse_body();
      m.blocks.push_back(std::move(b));
    } else if (ts_.accept_ident("inst")) {
      m.instances.push_back(parse_instance(kw));
    } else {
      ts_.fail(kw, "expected a declaration, block or instance but found '" + kw.text + "'");
    }
  }

  VarDecl parse_decl() {
    const Token& kw = ts_.next();
    VarDecl v;
    v.loc = loc(kw);
    if (kw.text == "input") v.kind = VarKind::kInput;
    if (kw.text == "output") v.kind = VarKind::kOutput;
    if (kw.text == "wire") v.kind = VarKind::kWire;
    if (kw.text == "reg") v.kind = VarKind::kReg;
    v.name = parse_name("variable name");
    if (ts_.accept_punct("[")) {
      const Token& n = ts_.peek();
      const uint64_t size = ts_.expect_number();
      if (size == 0 || size > 4096) ts_.fail(n, "array size must be in 1..4096");
      v.array_size = static_cast<uint32_t>(size);
      ts_.expect_punct("]");
    }
    ts_.expect_punct(":");
    const Token& wt = ts_.peek();
    const uint64_t width = ts_.expect_number();
    if (width == 0 || width > kMaxWidth) ts_.fail(wt, "width must be in 1..64");
    v.width = static_cast<uint32_t>(width);
    if (v.kind == VarKind::kReg) {
      ts_.expect_punct("@");
      v.clock = parse_name("clock name");
      if (ts_.accept_ident("reset")) {
        const Token& rt = ts_.peek();
        v.reset = ts_.expect_number();
        if ((*v.reset & ~width_mask(v.width)) != 0) ts_.fail(rt, "reset value does not fit width");
      }
    }
    ts_.expect_punct(";");
    return v;
  }

  InstanceDecl parse_instance(const Token& kw) {
    InstanceDecl inst;
    inst.loc = loc(kw);
    const Token& name = ts_.expect_ident("instance name");
    check_not_keyword(name);
    inst.name = name.text;
    ts_.expect_punct(":");
    inst.module = ts_.expect_ident("module name").text;
    ts_.expect_punct("(");
    if (!ts_.accept_punct(")")) {
      do {
        PortBinding b;
        b.loc = loc(ts_.peek());
        b.port = parse_expr(ts_);
        if (b.port.kind != Expr::Kind::kIdent) ts_.fail(ts_.peek(), "expected port name");
        if (ts_.accept_punct("=>")) {
          b.is_output = true;
        } else {
          ts_.expect_punct("=");
        }
        b.expr = parse_expr(ts_);
        inst.bindings.push_back(std::move(b));
      } while (ts_.accept_punct(","));
      ts_.expect_punct(")");
    }
    ts_.expect_punct(";");
    return inst;
  }

  std::vector<Stmt> parse_body() {
    ts_.expect_punct("{");
    std::vector<Stmt> out;
    while (!ts_.accept_punct("}")) {
      if (ts_.at_end()) ts_.fail(ts_.peek(), "expected '}'");
      out.push_back(parse_stmt());
    }
    return out;
  }

  Stmt parse_if(const Token& kw) {
    Stmt s;
    s.kind = Stmt::Kind::kIf;
    s.loc = loc(kw);
    s.cond = parse_expr(ts_);
    s.then_body = parse_body();
    if (ts_.is_ident("else")) {
      ts_.next();
      if (ts_.is_ident("if")) {
        const Token& nested = ts_.next();
        s.else_body.push_back(parse_if(nested));
      } else {
        s.else_body = parse_body();
      }
    }
    return s;
  }

  Stmt parse_stmt() {
    const Token& t = ts_.peek();
    if (ts_.accept_ident("if")) return parse_if(t);
    if (ts_.accept_ident("for")) {
      Stmt s;
      s.kind = Stmt::Kind::kFor;
      s.loc = loc(t);
      const Token& var = ts_.expect_ident("loop variable");
      check_not_keyword(var);
      s.loop_var = var.text;
      ts_.expect_ident_word("in");
      s.lo = parse_bound();
      ts_.expect_punct("..");
      s.hi = parse_bound();
      s.body = parse_body();
      return s;
    }
    if (ts_.is_punct("{")) {
      Stmt s;
      s.kind = Stmt::Kind::kBlock;
      s.loc = loc(t);
      s.body = parse_body();
      return s;
    }
    if (t.kind != TokenKind::kIdent) ts_.fail(t, "expected a statement but found '" + t.text + "'");
    Stmt s;
    s.kind = Stmt::Kind::kAssign;
    s.loc = loc(t);
    s.target = parse_expr(ts_);
    if (s.target.kind != Expr::Kind::kIdent) ts_.fail(t, "left-hand side must be a variable");
    ts_.expect_punct("=");
    s.value = parse_expr(ts_);
    ts_.expect_punct(";");
    return s;
  }

  uint64_t parse_bound() {
    const Token& t = ts_.peek();
    if (t.kind == TokenKind::kNumber) return ts_.expect_number();
    if (t.kind == TokenKind::kIdent) {
      ts_.fail(t, "non-constant loop bound '" + t.text + "'");
    }
    ts_.fail(t, "expected an integer loop bound");
  }

  std::string file_;
  TokenStream ts_;
};

// ---------------------------------------------------------------------------
// Validation

class Validator {
 public:
  explicit Validator(SourceProgram& program) : program_(program), file_(program.file) {}

  void run() {
    std::set<std::string> names;
    for (const auto& m : program_.modules) {
      if (!names.insert(m.name).second) fail_at(m.loc, "duplicate module '" + m.name + "'");
    }
    if (program_.modules.empty()) throw SyntaxError(file_, TextPos{}, "no module defined");
    for (const auto& m : program_.modules) check_module_names(m);
    pick_top();
    check_instance_graph();
    for (const auto& m : program_.modules) check_module(m);
    elaborate(program_);
  }

 private:
  void check_module_names(const ModuleDef& m) {
    std::set<std::string> names;
    std::set<std::string> rtl;
    for (const auto& v : m.vars) {
      if (!names.insert(v.name).second) fail_at(v.loc, "duplicate name '" + v.name + "'");
      for (uint32_t i = 0; i < v.element_count(); ++i) {
        if (!rtl.insert(v.rtl_element(i)).second) {
          fail_at(v.loc, "name '" + v.name + "' collides with another flattened name");
        }
      }
    }
    for (const auto& inst : m.instances) {
      if (!names.insert(inst.name).second) fail_at(inst.loc, "duplicate name '" + inst.name + "'");
    }
    for (const auto& v : m.vars) {
      const bool needs_clock = v.kind == VarKind::kReg;
      if (!needs_clock) continue;
      const VarDecl* clk = m.find_var(v.clock);
      if (clk == nullptr || clk->kind != VarKind::kClock) {
        fail_at(v.loc, "'" + v.clock + "' is not a clock of module '" + m.name + "'");
      }
      if (v.reset) {
        const VarDecl* rst = m.find_var("rst");
        if (rst == nullptr || rst->kind != VarKind::kInput || rst->is_array() || rst->width != 1) {
          fail_at(v.loc, "register '" + v.name + "' has a reset value but module '" + m.name +
                             "' has no 1-bit 'rst' input");
        }
      }
    }
  }

  void pick_top() {
    std::set<std::string> instantiated;
    for (const auto& m : program_.modules) {
      for (const auto& inst : m.instances) {
        if (program_.find_module(inst.module) == nullptr) {
          fail_at(inst.loc, "unknown module '" + inst.module + "'");
        }
        instantiated.insert(inst.module);
      }
    }
    for (auto it = program_.modules.rbegin(); it != program_.modules.rend(); ++it) {
      if (!instantiated.count(it->name)) {
        program_.top = it->name;
        return;
      }
    }
    fail_at(program_.modules.front().loc, "module instantiation graph is cyclic");
  }

  void check_instance_graph() {
    std::map<std::string, int> state;  // 1 visiting, 2 done
    std::function<void(const ModuleDef&)> visit = [&](const ModuleDef& m) {
      state[m.name] = 1;
      for (const auto& inst : m.instances) {
        const ModuleDef* child = program_.find_module(inst.module);
        const int s = state[child->name];
        if (s == 1) fail_at(inst.loc, "module instantiation cycle through '" + inst.module + "'");
        if (s == 0) visit(*child);
      }
      state[m.name] = 2;
    };
    for (const auto& m : program_.modules) {
      if (state[m.name] == 0) visit(m);
    }
  }

  void check_module(const ModuleDef& m) {
    // Every combinational element has exactly one driver.
    std::map<std::pair<const VarDecl*, uint32_t>, SourceLoc> drivers;
    auto drive = [&](const ElementRef& r, const SourceLoc& at) {
      auto [it, inserted] = drivers.emplace(std::make_pair(r.decl, r.index), at);
      if (!inserted && !(it->second == at)) {
        fail_at(at, "'" + r.source_name() + "' is driven from more than one place");
      }
    };

    for (const auto& block : m.blocks) {
      if (block.kind == Block::Kind::kSeq) {
        const VarDecl* clk = m.find_var(block.clock);
        if (clk == nullptr || clk->kind != VarKind::kClock) {
          fail_at(block.loc, "'" + block.clock + "' is not a clock of module '" + m.name + "'");
        }
      }
      check_loop_vars(m, block.body, {});
      std::set<std::pair<const VarDecl*, uint32_t>> assigned;
      LoopEnv env;
      walk_unrolled(block.body, env, [&](const Stmt& s, const LoopEnv& e) {
        if (s.kind == Stmt::Kind::kAssign) {
          const ElementRef r = resolve_element(m, s.target, e, file_);
          check_target(m, block, r, s);
          if (!assigned.count({r.decl, r.index})) drive(r, block.loc);
          assigned.emplace(r.decl, r.index);
          for_each_read(m, s.value, e, file_, no_clock_reads(s.loc));
        } else if (s.kind == Stmt::Kind::kIf) {
          for_each_read(m, s.cond, e, file_, no_clock_reads(s.loc));
        }
      });
      if (block.kind == Block::Kind::kComb) check_definite_assignment(m, block, assigned);
    }

    for (const auto& inst : m.instances) check_instance(m, inst, drive);

    for (const auto& v : m.vars) {
      if (v.kind != VarKind::kOutput && v.kind != VarKind::kWire) continue;
      for (uint32_t i = 0; i < v.element_count(); ++i) {
        if (!drivers.count({&v, i})) fail_at(v.loc, "'" + v.element(i) + "' is never driven");
      }
    }
  }

  static std::function<void(const ElementRef&)> no_clock_reads(const SourceLoc& at) {
    return [at](const ElementRef& r) {
      if (r.decl->kind == VarKind::kClock) {
        fail_at(at, "clock '" + r.decl->name + "' cannot be read in an expression");
      }
    };
  }

  void check_loop_vars(const ModuleDef& m, const std::vector<Stmt>& stmts,
                       std::vector<std::string> active) {
    for (const auto& s : stmts) {
      if (s.kind == Stmt::Kind::kFor) {
        if (m.find_var(s.loop_var) || m.find_instance(s.loop_var) ||
            std::find(active.begin(), active.end(), s.loop_var) != active.end()) {
          fail_at(s.loc, "loop variable '" + s.loop_var + "' shadows another name");
        }
        auto inner = active;
        inner.push_back(s.loop_var);
        check_loop_vars(m, s.body, inner);
      } else {
        check_loop_vars(m, s.then_body, active);
        check_loop_vars(m, s.else_body, active);
        check_loop_vars(m, s.body, active);
      }
    }
  }

  void check_target(const ModuleDef& m, const Block& block, const ElementRef& r, const Stmt& s) {
    if (block.kind == Block::Kind::kComb) {
      if (r.decl->kind != VarKind::kWire && r.decl->kind != VarKind::kOutput) {
        fail_at(s.loc, "'" + r.decl->name + "' cannot be assigned in a comb block (it is a " +
                           std::string(to_string(r.decl->kind)) + ")");
      }
    } else {
      if (r.decl->kind != VarKind::kReg) {
        fail_at(s.loc, "only registers can be assigned in a seq block ('" + r.decl->name + "')");
      }
      if (r.decl->clock != block.clock) {
        fail_at(s.loc, "register '" + r.decl->name + "' is clocked by '" + r.decl->clock +
                           "', not '" + block.clock + "'");
      }
    }
    (void)m;
  }

  // A combinational element must be defined unconditionally before it is
  // read, and its first assignment may not sit under an if.
  void check_definite_assignment(const ModuleDef& m, const Block& block,
                                 const std::set<std::pair<const VarDecl*, uint32_t>>& assigned) {
    std::set<std::pair<const VarDecl*, uint32_t>> defined;
    LoopEnv env;
    std::function<void(const std::vector<Stmt>&, bool)> walk = [&](const std::vector<Stmt>& stmts,
                                                                   bool conditional) {
      for (const auto& s : stmts) {
        auto check_reads = [&](const Expr& e) {
          for_each_read(m, e, env, file_, [&](const ElementRef& r) {
            if (assigned.count({r.decl, r.index}) && !defined.count({r.decl, r.index})) {
              fail_at(s.loc, "'" + r.source_name() + "' is used before it is assigned");
            }
          });
        };
        switch (s.kind) {
          case Stmt::Kind::kAssign: {
            check_reads(s.value);
            const ElementRef r = resolve_element(m, s.target, env, file_);
            if (!defined.count({r.decl, r.index})) {
              if (conditional) {
                fail_at(s.loc, "'" + r.source_name() +
                                   "' is assigned under a condition before any unconditional "
                                   "assignment (latch)");
              }
              defined.emplace(r.decl, r.index);
            }
            break;
          }
          case Stmt::Kind::kIf:
            check_reads(s.cond);
            walk(s.then_body, true);
            walk(s.else_body, true);
            break;
          case Stmt::Kind::kFor:
            for (uint64_t i = s.lo; i < s.hi; ++i) {
              env.emplace_back(s.loop_var, i);
              walk(s.body, conditional);
              env.pop_back();
            }
            break;
          case Stmt::Kind::kBlock:
            walk(s.body, conditional);
            break;
        }
      }
    };
    walk(block.body, false);
  }

  template <typename Drive>
  void check_instance(const ModuleDef& m, const InstanceDecl& inst, Drive& drive) {
    const ModuleDef* child = program_.find_module(inst.module);
    std::set<std::pair<const VarDecl*, uint32_t>> bound;
    for (const auto& b : inst.bindings) {
      const VarDecl* port = child->find_var(b.port.name);
      if (port == nullptr || (port->kind != VarKind::kInput && port->kind != VarKind::kOutput &&
                              port->kind != VarKind::kClock)) {
        fail_at(b.loc, "module '" + child->name + "' has no port '" + b.port.name + "'");
      }
      const ElementRef pr = resolve_element(*child, b.port, {}, file_);
      if (!bound.emplace(pr.decl, pr.index).second) {
        fail_at(b.loc, "port '" + pr.source_name() + "' bound twice");
      }
      if (b.is_output != (port->kind == VarKind::kOutput)) {
        fail_at(b.loc, b.is_output ? "'" + port->name + "' is not an output; bind it with '='"
                                   : "'" + port->name + "' is an output; bind it with '=>'");
      }
      if (port->kind == VarKind::kClock) {
        const VarDecl* pc = b.expr.kind == Expr::Kind::kIdent && !b.expr.indexed
                                ? m.find_var(b.expr.name)
                                : nullptr;
        if (pc == nullptr || pc->kind != VarKind::kClock) {
          fail_at(b.loc, "clock port '" + port->name + "' must be bound to a clock");
        }
      } else if (port->kind == VarKind::kInput) {
        for_each_read(m, b.expr, {}, file_, [&](const ElementRef& r) {
          if (r.decl->kind == VarKind::kClock) {
            fail_at(b.loc, "clock '" + r.decl->name + "' can only be bound to a clock port");
          }
        });
      } else {
        const ElementRef target = resolve_element(m, b.expr, {}, file_);
        if (target.decl->kind != VarKind::kWire && target.decl->kind != VarKind::kOutput) {
          fail_at(b.loc, "output '" + port->name + "' must drive a wire or output");
        }
        if (target.decl->width < port->width) {
          fail_at(b.loc, "output '" + port->name + "' is wider than '" + target.source_name() + "'");
        }
        drive(target, b.loc);
      }
    }
    for (const auto& v : child->vars) {
      if (v.kind != VarKind::kInput && v.kind != VarKind::kClock) continue;
      for (uint32_t i = 0; i < v.element_count(); ++i) {
        if (!bound.count({&v, i})) {
          fail_at(inst.loc, "port '" + v.element(i) + "' of instance '" + inst.name + "' is unbound");
        }
      }
    }
  }

  SourceProgram& program_;
  std::string file_;
};

}  // namespace

SourceProgram parse(std::string_view source_text, std::string_view file) {
  Parser parser(source_text, normalize_path(file));
  SourceProgram program = parser.parse_program();
  Validator(program).run();
  return program;
}

// ---------------------------------------------------------------------------
// Elaboration

ElaboratedDesign elaborate(const SourceProgram& program) {
  ElaboratedDesign design;
  const std::string& file = program.file;
  std::function<void(const ModuleDef&, const std::string&, int, const InstanceDecl*)> add =
      [&](const ModuleDef& m, const std::string& path, int parent, const InstanceDecl* decl) {
        const int id = static_cast<int>(design.instances.size());
        design.instances.push_back(ElabInstance{path, &m, parent, decl, {}});
        if (parent >= 0) design.instances[parent].children.push_back(id);
        for (const auto& inst : m.instances) {
          add(*program.find_module(inst.module), path + "." + inst.name, id, &inst);
        }
      };
  add(program.top_module(), program.top, -1, nullptr);

  // Nodes and their element dependencies. Elements are keyed by instance id
  // and flattened name.
  using Key = std::pair<int, std::string>;
  std::vector<CombNode> nodes;
  std::vector<std::vector<Key>> reads;
  std::vector<SourceLoc> node_locs;
  std::map<Key, size_t> writer;

  for (int id = 0; id < static_cast<int>(design.instances.size()); ++id) {
    const ElabInstance& inst = design.instances[id];
    const ModuleDef& m = *inst.def;
    for (size_t b = 0; b < m.blocks.size(); ++b) {
      const Block& block = m.blocks[b];
      if (block.kind != Block::Kind::kComb) continue;
      const size_t n = nodes.size();
      nodes.push_back(CombNode{CombNode::Kind::kBlock, id, b});
      node_locs.push_back(block.loc);
      std::set<std::string> written;
      std::vector<Key> r;
      LoopEnv env;
      walk_unrolled(block.body, env, [&](const Stmt& s, const LoopEnv& e) {
        auto add_read = [&](const ElementRef& ref) { r.emplace_back(id, ref.rtl_name()); };
        if (s.kind == Stmt::Kind::kAssign) {
          const ElementRef t = resolve_element(m, s.target, e, file);
          written.insert(t.rtl_name());
          writer[{id, t.rtl_name()}] = n;
          for_each_read(m, s.value, e, file, add_read);
        } else if (s.kind == Stmt::Kind::kIf) {
          for_each_read(m, s.cond, e, file, add_read);
        }
      });
      std::erase_if(r, [&](const Key& k) { return written.count(k.second) > 0; });
      reads.push_back(std::move(r));
    }
    if (inst.decl == nullptr) continue;
    const ModuleDef& parent = *design.instances[inst.parent].def;
    for (size_t b = 0; b < inst.decl->bindings.size(); ++b) {
      const PortBinding& binding = inst.decl->bindings[b];
      const ElementRef port = resolve_element(m, binding.port, {}, file);
      if (port.decl->kind == VarKind::kClock) continue;
      const size_t n = nodes.size();
      node_locs.push_back(binding.loc);
      std::vector<Key> r;
      if (binding.is_output) {
        nodes.push_back(CombNode{CombNode::Kind::kOutputBinding, id, b});
        const ElementRef target = resolve_element(parent, binding.expr, {}, file);
        writer[{inst.parent, target.rtl_name()}] = n;
        r.emplace_back(id, port.rtl_name());
      } else {
        nodes.push_back(CombNode{CombNode::Kind::kInputBinding, id, b});
        writer[{id, port.rtl_name()}] = n;
        for_each_read(parent, binding.expr, {}, file,
                      [&](const ElementRef& ref) { r.emplace_back(inst.parent, ref.rtl_name()); });
      }
      reads.push_back(std::move(r));
    }
  }

  // Kahn's algorithm, lowest node index first for determinism.
  std::vector<std::vector<size_t>> succ(nodes.size());
  std::vector<size_t> indegree(nodes.size(), 0);
  for (size_t n = 0; n < nodes.size(); ++n) {
    std::set<size_t> preds;
    for (const auto& k : reads[n]) {
      auto it = writer.find(k);
      if (it != writer.end()) preds.insert(it->second);
    }
    for (size_t p : preds) {
      if (p == n) fail_at(node_locs[n], "combinational cycle");
      succ[p].push_back(n);
      ++indegree[n];
    }
  }
  std::set<size_t> ready;
  for (size_t n = 0; n < nodes.size(); ++n) {
    if (indegree[n] == 0) ready.insert(n);
  }
  while (!ready.empty()) {
    const size_t n = *ready.begin();
    ready.erase(ready.begin());
    design.comb_order.push_back(nodes[n]);
    for (size_t s : succ[n]) {
      if (--indegree[s] == 0) ready.insert(s);
    }
  }
  if (design.comb_order.size() != nodes.size()) {
    for (size_t n = 0; n < nodes.size(); ++n) {
      if (indegree[n] > 0) fail_at(node_locs[n], "combinational cycle");
    }
  }
  return design;
}

// ---------------------------------------------------------------------------
// Pretty printer

namespace {

void print_stmts(const std::vector<Stmt>& stmts, int depth, std::ostringstream& out);

void print_stmt(const Stmt& s, int depth, std::ostringstream& out) {
  const std::string pad(static_cast<size_t>(depth) * 2, ' ');
  switch (s.kind) {
    case Stmt::Kind::kAssign:
      out << pad << to_string(s.target) << " = " << to_string(s.value) << ";\n";
      break;
    case Stmt::Kind::kIf:
      out << pad << "if " << to_string(s.cond) << " {\n";
      print_stmts(s.then_body, depth + 1, out);
      out << pad << "}";
      if (!s.else_body.empty()) {
        out << " else {\n";
        print_stmts(s.else_body, depth + 1, out);
        out << pad << "}";
      }
      out << "\n";
      break;
    case Stmt::Kind::kFor:
      out << pad << "for " << s.loop_var << " in " << s.lo << ".." << s.hi << " {\n";
      print_stmts(s.body, depth + 1, out);
      out << pad << "}\n";
      break;
    case Stmt::Kind::kBlock:
      out << pad << "{\n";
      print_stmts(s.body, depth + 1, out);
      out << pad << "}\n";
      break;
  }
}

void print_stmts(const std::vector<Stmt>& stmts, int depth, std::ostringstream& out) {
  for (const auto& s : stmts) print_stmt(s, depth, out);
}

bool same_exprs(const Expr& a, const Expr& b) { return a.same_as(b); }

bool same_stmts(const std::vector<Stmt>& a, const std::vector<Stmt>& b);

bool same_stmt(const Stmt& a, const Stmt& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Stmt::Kind::kAssign:
      return same_exprs(a.target, b.target) && same_exprs(a.value, b.value);
    case Stmt::Kind::kIf:
      return same_exprs(a.cond, b.cond) && same_stmts(a.then_body, b.then_body) &&
             same_stmts(a.else_body, b.else_body);
    case Stmt::Kind::kFor:
      return a.loop_var == b.loop_var && a.lo == b.lo && a.hi == b.hi &&
             same_stmts(a.body, b.body);
    case Stmt::Kind::kBlock:
      return same_stmts(a.body, b.body);
  }
  return false;
}

bool same_stmts(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!same_stmt(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

std::string pretty_print(const SourceProgram& program) {
  std::ostringstream out;
  for (size_t mi = 0; mi < program.modules.size(); ++mi) {
    const ModuleDef& m = program.modules[mi];
    if (mi > 0) out << "\n";
    out << "module " << m.name << " {\n";
    for (const auto& v : m.vars) {
      out << "  " << to_string(v.kind) << " " << v.name;
      if (v.kind != VarKind::kClock) {
        if (v.is_array()) out << "[" << v.array_size << "]";
        out << " : " << v.width;
      }
      if (v.kind == VarKind::kReg) {
        out << " @" << v.clock;
        if (v.reset) out << " reset " << *v.reset;
      }
      out << ";\n";
    }
    for (const auto& inst : m.instances) {
      out << "  inst " << inst.name << " : " << inst.module << " (";
      for (size_t i = 0; i < inst.bindings.size(); ++i) {
        const auto& b = inst.bindings[i];
        if (i > 0) out << ", ";
        out << to_string(b.port) << (b.is_output ? " => " : " = ") << to_string(b.expr);
      }
      out << ");\n";
    }
    for (const auto& b : m.blocks) {
      if (b.kind == Block::Kind::kComb) {
        out << "  comb {\n";
      } else {
        out << "  seq @" << b.clock << " {\n";
      }
      print_stmts(b.body, 2, out);
      out << "  }\n";
    }
    out << "}\n";
  }
  return out.str();
}

bool same_structure(const SourceProgram& a, const SourceProgram& b) {
  if (a.top != b.top || a.modules.size() != b.modules.size()) return false;
  for (size_t i = 0; i < a.modules.size(); ++i) {
    const ModuleDef& x = a.modules[i];
    const ModuleDef& y = b.modules[i];
    if (x.name != y.name || x.vars.size() != y.vars.size() || x.blocks.size() != y.blocks.size() ||
        x.instances.size() != y.instances.size()) {
      return false;
    }
    for (size_t v = 0; v < x.vars.size(); ++v) {
      const auto& p = x.vars[v];
      const auto& q = y.vars[v];
      if (p.name != q.name || p.kind != q.kind || p.width != q.width ||
          p.array_size != q.array_size || p.clock != q.clock || p.reset != q.reset) {
        return false;
      }
    }
    for (size_t k = 0; k < x.blocks.size(); ++k) {
      if (x.blocks[k].kind != y.blocks[k].kind || x.blocks[k].clock != y.blocks[k].clock ||
          !same_stmts(x.blocks[k].body, y.blocks[k].body)) {
        return false;
      }
    }
    for (size_t k = 0; k < x.instances.size(); ++k) {
      const auto& p = x.instances[k];
      const auto& q = y.instances[k];
      if (p.name != q.name || p.module != q.module || p.bindings.size() != q.bindings.size()) {
        return false;
      }
      for (size_t j = 0; j < p.bindings.size(); ++j) {
        if (p.bindings[j].is_output != q.bindings[j].is_output ||
            !same_exprs(p.bindings[j].port, q.bindings[j].port) ||
            !same_exprs(p.bindings[j].expr, q.bindings[j].expr)) {
          return false;
        }
      }
    }
  }
  return true;
}

}  // namespace hwdbg
