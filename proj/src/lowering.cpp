#include "hwdbg/lowering.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace hwdbg {

namespace {

class Lowerer {
 public:
  explicit Lowerer(const SourceProgram& program)
      : program_(program), design_(elaborate(program)) {}

  Lowered run() {
    for (const ElabInstance& inst : design_.instances) {
      out_.netlist.instances.push_back(
          NetInstance{inst.path, inst.def->name, inst.parent});
    }
    for (size_t i = 0; i < design_.instances.size(); ++i) create_element_nets(static_cast<int>(i));
    for (size_t i = 0; i < design_.instances.size(); ++i) lower_instance(static_cast<int>(i));
    out_.netlist.topo_order();
    return std::move(out_);
  }

 private:
  using Versions = std::map<std::string, int>;  // rtl leaf -> current SSA net

  struct BlockCtx {
    int instance = 0;
    const Block* block = nullptr;
    LoopEnv env;
    std::vector<std::pair<uint64_t, uint64_t>> loops;
    std::vector<NExpr> conds;
    Versions versions;
    std::map<std::string, uint32_t> counters;
  };

  const ElabInstance& inst(int id) const { return design_.instances[static_cast<size_t>(id)]; }

  int element_net(int instance, const std::string& rtl_leaf) const {
    return out_.netlist.find(inst(instance).path + "." + rtl_leaf);
  }

  void create_element_nets(int id) {
    const ElabInstance& ei = inst(id);
    const bool top = ei.parent < 0;
    Netlist& nl = out_.netlist;
    for (const VarDecl& v : ei.def->vars) {
      for (uint32_t k = 0; k < v.element_count(); ++k) {
        Net n;
        n.name = ei.path + "." + v.rtl_element(k);
        n.width = v.width;
        n.instance = id;
        n.source_name = v.element(k);
        switch (v.kind) {
          case VarKind::kClock:
            n.kind = top ? NetKind::kClock : NetKind::kWire;
            break;
          case VarKind::kInput:
            n.kind = top ? NetKind::kInput : NetKind::kWire;
            break;
          case VarKind::kReg:
            n.kind = NetKind::kReg;
            break;
          default:
            n.kind = NetKind::kWire;
        }
        const int net = nl.add_net(std::move(n));
        if (top && v.kind == VarKind::kClock) nl.clocks.push_back(net);
        if (top && v.kind == VarKind::kInput) nl.inputs.push_back(net);
        if (top && v.kind == VarKind::kOutput) nl.outputs.push_back(net);
      }
    }
  }

  void lower_instance(int id) {
    const ElabInstance& ei = inst(id);
    const ModuleDef& m = *ei.def;
    Netlist& nl = out_.netlist;

    for (const Block& block : m.blocks) {
      BlockCtx ctx;
      ctx.instance = id;
      ctx.block = &block;
      lower_stmts(ctx, block.body);
      if (block.kind == Block::Kind::kComb) {
        for (const auto& [leaf, version] : ctx.versions) {
          const int committed = element_net(id, leaf);
          nl.nets[committed].driver = NExpr::net_ref(version, nl.net(version).width);
        }
      } else {
        seq_versions_[id].insert(ctx.versions.begin(), ctx.versions.end());
      }
    }

    for (const VarDecl& v : m.vars) {
      if (v.kind != VarKind::kReg) continue;
      for (uint32_t k = 0; k < v.element_count(); ++k) {
        Register r;
        r.net = element_net(id, v.rtl_element(k));
        r.clock = element_net(id, v.clock);
        auto it = seq_versions_[id].find(v.rtl_element(k));
        r.next = it == seq_versions_[id].end() ? r.net : it->second;
        if (v.reset) {
          r.reset = *v.reset;
          r.rst = element_net(id, "rst");
        }
        nl.registers.push_back(r);
      }
    }

    // Port connections of this instance, driven from the parent.
    if (ei.decl == nullptr) return;
    const int parent = ei.parent;
    for (const PortBinding& b : ei.decl->bindings) {
      const ElementRef port = resolve_element(m, b.port, {}, program_.file);
      const int port_net = element_net(id, port.rtl_name());
      if (b.is_output) {
        const ElementRef target =
            resolve_element(*inst(parent).def, b.expr, {}, program_.file);
        nl.nets[element_net(parent, target.rtl_name())].driver =
            NExpr::net_ref(port_net, port.decl->width);
      } else {
        BlockCtx ctx;
        ctx.instance = parent;
        nl.nets[port_net].driver = convert(ctx, b.expr);
      }
    }
  }

  NExpr convert(const BlockCtx& ctx, const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::kLiteral:
        return NExpr::constant(e.value, e.width);
      case Expr::Kind::kIdent: {
        if (!e.indexed) {
          if (auto lv = loop_value(ctx.env, e.name)) {
            return NExpr::constant(*lv, bit_length(*lv));
          }
        }
        const ElementRef r = resolve_element(*inst(ctx.instance).def, e, ctx.env, program_.file);
        return NExpr::net_ref(read_net(ctx, r), r.decl->width);
      }
      case Expr::Kind::kUnary:
        return NExpr::unary(e.unary_op, convert(ctx, e.args[0]));
      case Expr::Kind::kBinary:
        return NExpr::binary(e.binary_op, convert(ctx, e.args[0]), convert(ctx, e.args[1]));
      case Expr::Kind::kTernary:
        return NExpr::select(convert(ctx, e.args[0]), convert(ctx, e.args[1]),
                             convert(ctx, e.args[2]));
    }
    return NExpr{};
  }

  // Comb blocks read their own latest SSA version; registers always read
  // the current (pre-edge) value.
  int read_net(const BlockCtx& ctx, const ElementRef& r) const {
    const std::string leaf = r.rtl_name();
    if (ctx.block != nullptr && ctx.block->kind == Block::Kind::kComb) {
      auto it = ctx.versions.find(leaf);
      if (it != ctx.versions.end()) return it->second;
    }
    return element_net(ctx.instance, leaf);
  }

  bool assigned_in_comb(const BlockCtx& ctx, const std::string& leaf) {
    auto key = std::make_pair(ctx.instance, ctx.block);
    auto it = assigned_.find(key);
    if (it == assigned_.end()) {
      std::set<std::string> leaves;
      const ModuleDef& m = *inst(ctx.instance).def;
      LoopEnv env;
      std::function<void(const std::vector<Stmt>&)> walk = [&](const std::vector<Stmt>& stmts) {
        for (const Stmt& s : stmts) {
          if (s.kind == Stmt::Kind::kAssign) {
            leaves.insert(resolve_element(m, s.target, env, program_.file).rtl_name());
          } else if (s.kind == Stmt::Kind::kFor) {
            for (uint64_t i = s.lo; i < s.hi; ++i) {
              env.emplace_back(s.loop_var, i);
              walk(s.body);
              env.pop_back();
            }
          } else {
            walk(s.then_body);
            walk(s.else_body);
            walk(s.body);
          }
        }
      };
      walk(ctx.block->body);
      it = assigned_.emplace(key, std::move(leaves)).first;
    }
    return it->second.count(leaf) > 0;
  }

  std::vector<VarMapping> scope(BlockCtx& ctx) {
    std::vector<VarMapping> out;
    for (const auto& [name, v] : ctx.env) out.push_back({name, std::to_string(v), true});
    const ModuleDef& m = *inst(ctx.instance).def;
    auto key = std::make_pair(ctx.instance, ctx.block);
    auto it = scopes_.find(key);
    if (it == scopes_.end()) {
      it = scopes_.emplace(key, block_scope_elements(m, *ctx.block, program_.file)).first;
    }
    const bool comb = ctx.block->kind == Block::Kind::kComb;
    for (const std::string& name : it->second) {
      const ElementRef r = resolve_element(m, parse_expr(name), {}, program_.file);
      const std::string leaf = r.rtl_name();
      int net = element_net(ctx.instance, leaf);
      if (comb && assigned_in_comb(ctx, leaf)) {
        auto v = ctx.versions.find(leaf);
        if (v == ctx.versions.end()) continue;
        net = v->second;
      }
      out.push_back({name, out_.netlist.net(net).name, false});
    }
    return out;
  }

  uint32_t ordinal(const BlockCtx& ctx) const {
    uint64_t o = 0;
    for (const auto& [iteration, trips] : ctx.loops) o = o * trips + iteration;
    return static_cast<uint32_t>(o);
  }

  void lower_stmts(BlockCtx& ctx, const std::vector<Stmt>& stmts) {
    for (const Stmt& s : stmts) {
      switch (s.kind) {
        case Stmt::Kind::kAssign:
          lower_assign(ctx, s);
          break;
        case Stmt::Kind::kIf: {
          NExpr c = convert(ctx, s.cond);
          ctx.conds.push_back(c);
          lower_stmts(ctx, s.then_body);
          ctx.conds.back() = NExpr::unary(UnaryOp::kLogicalNot, std::move(c));
          lower_stmts(ctx, s.else_body);
          ctx.conds.pop_back();
          break;
        }
        case Stmt::Kind::kFor: {
          const uint64_t trips = s.hi > s.lo ? s.hi - s.lo : 0;
          for (uint64_t i = s.lo; i < s.hi; ++i) {
            ctx.env.emplace_back(s.loop_var, i);
            ctx.loops.emplace_back(i - s.lo, trips);
            lower_stmts(ctx, s.body);
            ctx.loops.pop_back();
            ctx.env.pop_back();
          }
          break;
        }
        case Stmt::Kind::kBlock:
          lower_stmts(ctx, s.body);
          break;
      }
    }
  }

  void lower_assign(BlockCtx& ctx, const Stmt& s) {
    Netlist& nl = out_.netlist;
    const ElabInstance& ei = inst(ctx.instance);
    Annotation a;
    a.instance = ei.path;
    a.loc = s.loc;
    a.ordinal = ordinal(ctx);
    a.scope = scope(ctx);

    std::optional<NExpr> enable;
    for (const NExpr& c : ctx.conds) {
      enable = enable ? NExpr::binary(BinaryOp::kLogicalAnd, std::move(*enable), c) : c;
    }
    if (enable) {
      a.enable = render(*enable, nl);
      std::set<int> seen;
      for_each_net_ref(*enable, [&](int n) {
        if (seen.insert(n).second) a.enable_nets.push_back(nl.net(n).name);
      });
    } else {
      a.enable = "1";
    }

    const ElementRef target = resolve_element(*ei.def, s.target, ctx.env, program_.file);
    const std::string leaf = target.rtl_name();
    NExpr rhs = convert(ctx, s.value);
    if (enable) {
      int prev = -1;
      if (auto it = ctx.versions.find(leaf); it != ctx.versions.end()) {
        prev = it->second;
      } else if (ctx.block->kind == Block::Kind::kSeq) {
        prev = element_net(ctx.instance, leaf);
      } else {
        throw SyntaxError(s.loc.file, TextPos{s.loc.line, s.loc.column},
                          "'" + target.source_name() + "' is not assigned on every path");
      }
      rhs = NExpr::select(std::move(*enable), std::move(rhs),
                          NExpr::net_ref(prev, nl.net(prev).width));
    }
    uint32_t& k = ctx.counters[leaf];
    Net n;
    n.name = ei.path + "." + leaf + "__" + std::to_string(k++);
    n.width = target.decl->width;
    n.kind = NetKind::kSsa;
    n.driver = std::move(rhs);
    n.instance = ctx.instance;
    const int id = nl.add_net(std::move(n));
    ctx.versions[leaf] = id;
    a.target = nl.net(id).name;
    out_.annotations.push_back(std::move(a));
  }

  const SourceProgram& program_;
  ElaboratedDesign design_;
  Lowered out_;
  std::map<int, Versions> seq_versions_;
  std::map<std::pair<int, const Block*>, std::set<std::string>> assigned_;
  std::map<std::pair<int, const Block*>, std::vector<std::string>> scopes_;
};

// ---------------------------------------------------------------------------
// Optimization

// A constant or net reference can stand in for a wider parent node because
// reads zero-extend.
bool rewidth(NExpr& e, uint32_t width) {
  if (e.width == width) return true;
  if (e.width > width) return false;
  if (e.kind != NExpr::Kind::kConst && e.kind != NExpr::Kind::kNet) return false;
  e.width = width;
  return true;
}

bool replace_with(NExpr& e, NExpr part) {
  const uint32_t width = e.width;
  if (!rewidth(part, width)) return false;
  e = std::move(part);
  return true;
}

bool is_const(const NExpr& e, uint64_t v) { return e.kind == NExpr::Kind::kConst && e.value == v; }

// `aliases[n]` is the net that n copies unchanged, or -1.
void fold(NExpr& e, const std::vector<std::optional<uint64_t>>& constants,
          const std::vector<int>& aliases) {
  if (e.kind == NExpr::Kind::kNet) {
    if (const auto& c = constants[static_cast<size_t>(e.net)]) {
      e = NExpr::constant(*c, e.width);
    } else if (aliases[static_cast<size_t>(e.net)] >= 0) {
      e.net = aliases[static_cast<size_t>(e.net)];
    }
    return;
  }
  for (auto& a : e.args) fold(a, constants, aliases);
  const bool all_const = std::all_of(e.args.begin(), e.args.end(),
                                     [](const NExpr& a) { return a.is_const(); });
  switch (e.kind) {
    case NExpr::Kind::kConst:
    case NExpr::Kind::kNet:
      return;
    case NExpr::Kind::kUnary:
      if (all_const) e = NExpr::constant(apply(e.unary_op, e.args[0].value, e.width), e.width);
      return;
    case NExpr::Kind::kSelect:
      if (e.args[0].is_const()) {
        NExpr pick = e.args[e.args[0].value != 0 ? 1 : 2];
        replace_with(e, std::move(pick));
      }
      return;
    case NExpr::Kind::kBinary:
      break;
  }
  if (all_const) {
    e = NExpr::constant(apply(e.binary_op, e.args[0].value, e.args[1].value, e.width), e.width);
    return;
  }
  NExpr& l = e.args[0];
  NExpr& r = e.args[1];
  switch (e.binary_op) {
    case BinaryOp::kAdd:
    case BinaryOp::kOr:
    case BinaryOp::kXor:
      if (is_const(l, 0) && replace_with(e, r)) return;
      if (is_const(r, 0) && replace_with(e, l)) return;
      break;
    case BinaryOp::kSub:
    case BinaryOp::kShl:
    case BinaryOp::kShr:
      if (is_const(r, 0)) replace_with(e, l);
      break;
    case BinaryOp::kMul:
      if (is_const(l, 0) || is_const(r, 0)) {
        e = NExpr::constant(0, e.width);
      } else if (is_const(l, 1) && replace_with(e, r)) {
        return;
      } else if (is_const(r, 1)) {
        replace_with(e, l);
      }
      break;
    case BinaryOp::kDiv:
      if (is_const(r, 1)) replace_with(e, l);
      break;
    case BinaryOp::kAnd:
      if (is_const(l, 0) || is_const(r, 0)) e = NExpr::constant(0, e.width);
      break;
    case BinaryOp::kLogicalAnd:
      if (is_const(l, 0) || is_const(r, 0)) e = NExpr::constant(0, 1);
      break;
    case BinaryOp::kLogicalOr:
      if ((l.is_const() && l.value != 0) || (r.is_const() && r.value != 0)) {
        e = NExpr::constant(1, 1);
      }
      break;
    default:
      break;
  }
}

void remap(NExpr& e, const std::vector<int>& map) {
  if (e.kind == NExpr::Kind::kNet) {
    e.net = map[static_cast<size_t>(e.net)];
    return;
  }
  for (auto& a : e.args) remap(a, map);
}

}  // namespace

Lowered unroll_and_ssa(const SourceProgram& program) { return Lowerer(program).run(); }

Lowered optimize(Lowered lowered, OptLevel level, OptimizeReport* report) {
  OptimizeReport local;
  OptimizeReport& rep = report != nullptr ? *report : local;
  rep = OptimizeReport{};
  if (level == OptLevel::kDebug) return lowered;

  Netlist& nl = lowered.netlist;
  std::vector<std::optional<uint64_t>> constants(nl.nets.size());
  std::vector<int> aliases(nl.nets.size(), -1);
  for (int id : nl.topo_order()) {
    Net& n = nl.nets[static_cast<size_t>(id)];
    fold(*n.driver, constants, aliases);
    if (n.driver->is_const()) {
      constants[static_cast<size_t>(id)] = n.driver->value & width_mask(n.width);
      ++rep.folded_nets;
    } else if (n.driver->kind == NExpr::Kind::kNet && nl.net(n.driver->net).width == n.width) {
      aliases[static_cast<size_t>(id)] = n.driver->net;
    }
  }

  auto mark = [&](std::vector<bool>& live, std::vector<int> work) {
    while (!work.empty()) {
      const int id = work.back();
      work.pop_back();
      if (id < 0 || live[static_cast<size_t>(id)]) continue;
      live[static_cast<size_t>(id)] = true;
      if (const auto& d = nl.net(id).driver) for_each_net_ref(*d, [&](int m) { work.push_back(m); });
    }
  };
  std::vector<int> roots;
  roots.insert(roots.end(), nl.inputs.begin(), nl.inputs.end());
  roots.insert(roots.end(), nl.clocks.begin(), nl.clocks.end());
  roots.insert(roots.end(), nl.outputs.begin(), nl.outputs.end());
  for (const Register& r : nl.registers) {
    roots.insert(roots.end(), {r.net, r.next, r.clock, r.rst});
  }
  std::vector<bool> live(nl.nets.size(), false);
  mark(live, roots);

  // Annotations whose statement survived keep their enable logic alive.
  std::vector<Annotation> kept;
  for (Annotation& a : lowered.annotations) {
    const int target = nl.find(a.target);
    if (target < 0 || !live[static_cast<size_t>(target)]) {
      ++rep.dropped_annotations;
      continue;
    }
    kept.push_back(std::move(a));
  }
  std::vector<int> enable_roots;
  for (const Annotation& a : kept) {
    for (const auto& name : a.enable_nets) enable_roots.push_back(nl.find(name));
  }
  mark(live, enable_roots);

  std::vector<int> map(nl.nets.size(), -1);
  std::vector<Net> nets;
  for (size_t i = 0; i < nl.nets.size(); ++i) {
    if (!live[i]) {
      ++rep.removed_nets;
      continue;
    }
    map[i] = static_cast<int>(nets.size());
    nets.push_back(std::move(nl.nets[i]));
  }
  for (Net& n : nets) {
    if (n.driver) remap(*n.driver, map);
  }
  nl.nets = std::move(nets);
  auto remap_ids = [&](std::vector<int>& ids) {
    for (int& id : ids) id = map[static_cast<size_t>(id)];
  };
  remap_ids(nl.inputs);
  remap_ids(nl.outputs);
  remap_ids(nl.clocks);
  for (Register& r : nl.registers) {
    r.net = map[static_cast<size_t>(r.net)];
    r.next = map[static_cast<size_t>(r.next)];
    r.clock = map[static_cast<size_t>(r.clock)];
    if (r.rst >= 0) r.rst = map[static_cast<size_t>(r.rst)];
  }
  nl.reindex();

  for (Annotation& a : kept) {
    std::erase_if(a.scope, [&](const VarMapping& v) { return !v.constant && nl.find(v.rtl_name) < 0; });
  }
  lowered.annotations = std::move(kept);
  return lowered;
}

SymbolTable collect_symbols(const Netlist& netlist, const std::vector<Annotation>& annotations,
                            CollectReport* report) {
  CollectReport local;
  CollectReport& rep = report != nullptr ? *report : local;
  rep = CollectReport{};
  SymbolTable t;
  std::map<std::string, int64_t> instance_ids;
  for (const NetInstance& inst : netlist.instances) {
    const int64_t id = static_cast<int64_t>(t.instances.size()) + 1;
    t.instances.push_back(InstanceRow{id, inst.path, inst.module});
    instance_ids[inst.path] = id;
  }

  std::map<std::pair<int64_t, std::string>, int64_t> variable_ids;
  auto variable = [&](int64_t instance, const std::string& rtl, const std::string& source,
                      bool instance_var) {
    auto [it, inserted] = variable_ids.try_emplace({instance, rtl}, 0);
    if (inserted) {
      it->second = static_cast<int64_t>(t.variables.size()) + 1;
      t.variables.push_back(VariableRow{it->second, rtl, source, instance_var, instance});
    }
    return it->second;
  };

  // Instance variables: every declared element that still has a net.
  for (const Net& n : netlist.nets) {
    if (n.source_name.empty()) continue;
    const int64_t inst = instance_ids.at(netlist.instances[static_cast<size_t>(n.instance)].path);
    variable(inst, n.name, n.source_name, true);
  }

  for (const Annotation& a : annotations) {
    auto inst = instance_ids.find(a.instance);
    if (inst == instance_ids.end() || netlist.find(a.target) < 0) {
      ++rep.dangling;
      continue;
    }
    std::vector<const VarMapping*> mapped;
    bool any_net = false;
    for (const VarMapping& v : a.scope) {
      if (v.constant || netlist.find(v.rtl_name) >= 0) mapped.push_back(&v);
      if (!v.constant) any_net = true;
    }
    const bool all_removed =
        any_net && std::none_of(mapped.begin(), mapped.end(),
                                [](const VarMapping* v) { return !v->constant; });
    if (all_removed) {
      ++rep.unmapped;
      continue;
    }
    BreakpointRow bp;
    bp.id = static_cast<int64_t>(t.breakpoints.size()) + 1;
    bp.instance_id = inst->second;
    bp.file = a.loc.file;
    bp.line = a.loc.line;
    bp.column = a.loc.column;
    bp.ordinal = a.ordinal;
    bp.enable = a.enable;
    t.breakpoints.push_back(bp);
    for (const VarMapping* v : mapped) {
      const int64_t var = variable(inst->second, v->rtl_name, v->source_name, false);
      t.scope_variables.push_back(ScopeVariableRow{bp.id, var, v->source_name});
    }
  }
  t.compute_order();
  t.build_index();
  return t;
}

Compiled compile(std::string_view source_text, std::string_view file, OptLevel level) {
  Compiled c;
  c.program = parse(source_text, file);
  c.lowered = optimize(unroll_and_ssa(c.program), level, &c.optimize_report);
  c.symbols = collect_symbols(c.lowered.netlist, c.lowered.annotations, &c.collect_report);
  return c;
}

}  // namespace hwdbg
