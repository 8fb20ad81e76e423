// Reference interpreter for the hardware language. It executes statements
// directly from the source tree, without unrolling or SSA, and is the oracle
// every downstream stage is checked against.

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "hwdbg/frontend.hpp"

namespace hwdbg {

namespace {

struct InstanceState {
  const ElabInstance* elab = nullptr;
  std::vector<Value> values;
  std::unordered_map<std::string, size_t> by_source;  // `data[0]` -> slot
  std::unordered_map<std::string, size_t> by_rtl;     // `data_0` -> slot
  std::vector<std::pair<const VarDecl*, uint32_t>> slots;

  size_t slot(const std::string& source_name) const { return by_source.at(source_name); }
};

Value resize(uint64_t bits, uint32_t width) { return Value::make(bits, width); }

// Two-valued evaluation with design-language semantics.
Value eval_design(const Expr& e, const std::function<Value(const Expr&)>& read) {
  switch (e.kind) {
    case Expr::Kind::kLiteral:
      return Value::make(e.value, e.width);
    case Expr::Kind::kIdent:
      return read(e);
    case Expr::Kind::kUnary: {
      const Value a = eval_design(e.args[0], read);
      const uint32_t w = result_width(e.unary_op, a.width);
      return Value::make(apply(e.unary_op, a.bits, w), w);
    }
    case Expr::Kind::kBinary: {
      const Value a = eval_design(e.args[0], read);
      const Value b = eval_design(e.args[1], read);
      const uint32_t w = result_width(e.binary_op, a.width, b.width);
      return Value::make(apply(e.binary_op, a.bits, b.bits, w), w);
    }
    case Expr::Kind::kTernary: {
      const Value c = eval_design(e.args[0], read);
      const Value t = eval_design(e.args[1], read);
      const Value f = eval_design(e.args[2], read);
      return Value::make(c.bits != 0 ? t.bits : f.bits, std::max(t.width, f.width));
    }
  }
  return Value{};
}

class Interpreter {
 public:
  explicit Interpreter(const SourceProgram& program)
      : program_(program), design_(elaborate(program)) {
    states_.resize(design_.instances.size());
    for (size_t i = 0; i < design_.instances.size(); ++i) {
      InstanceState& st = states_[i];
      st.elab = &design_.instances[i];
      for (const auto& v : st.elab->def->vars) {
        for (uint32_t k = 0; k < v.element_count(); ++k) {
          const size_t slot = st.values.size();
          uint64_t init = 0;
          if (v.kind == VarKind::kReg && v.reset) init = *v.reset;
          if (v.kind == VarKind::kClock) init = 1;
          st.values.push_back(Value::make(init, v.width));
          st.by_source[v.element(k)] = slot;
          st.by_rtl[v.rtl_element(k)] = slot;
          st.slots.emplace_back(&v, k);
        }
      }
      for (const auto& b : st.elab->def->blocks) {
        scopes_[&b] = block_scope_elements(*st.elab->def, b, program_.file);
      }
    }
  }

  ExecutionTrace run(const std::vector<InputMap>& stimulus) {
    ExecutionTrace trace;
    for (uint64_t cycle = 0; cycle < stimulus.size(); ++cycle) {
      apply_inputs(stimulus[cycle]);
      cycle_ = cycle;
      log_ = &trace.log;
      settle();
      trace.cycles.push_back(snapshot());
      clock_edge();
    }
    return trace;
  }

 private:
  void apply_inputs(const InputMap& inputs) {
    InstanceState& top = states_[0];
    std::set<std::string> seen;
    for (const auto& [name, value] : inputs) {
      auto it = top.by_source.find(name);
      if (it == top.by_source.end() || top.slots[it->second].first->kind != VarKind::kInput) {
        throw Error("stimulus assigns unknown input '" + name + "'");
      }
      const uint32_t width = top.slots[it->second].first->width;
      if (!value.known || (value.bits & ~width_mask(width)) != 0) {
        throw Error("stimulus value " + value.to_string() + " does not fit " +
                    std::to_string(width) + "-bit input '" + name + "'");
      }
      top.values[it->second] = Value::make(value.bits, width);
      seen.insert(name);
    }
    for (const auto& [name, width] : stimulus_inputs(program_)) {
      if (!seen.count(name)) throw Error("stimulus does not assign input '" + name + "'");
    }
  }

  void settle() {
    for (const CombNode& node : design_.comb_order) {
      InstanceState& st = states_[node.instance];
      switch (node.kind) {
        case CombNode::Kind::kBlock: {
          const Block& block = st.elab->def->blocks[node.index];
          BlockRun run{st, block, nullptr, {}, {}, {}};
          exec(run, block.body);
          break;
        }
        case CombNode::Kind::kInputBinding:
        case CombNode::Kind::kOutputBinding: {
          const PortBinding& b = st.elab->decl->bindings[node.index];
          InstanceState& parent = states_[st.elab->parent];
          const ElementRef port = resolve_element(*st.elab->def, b.port, {}, program_.file);
          const size_t port_slot = st.by_source.at(port.source_name());
          if (node.kind == CombNode::Kind::kInputBinding) {
            const Value v = eval_design(b.expr, [&](const Expr& id) {
              return parent.values[parent.slot(
                  resolve_element(*parent.elab->def, id, {}, program_.file).source_name())];
            });
            st.values[port_slot] = resize(v.bits, port.decl->width);
          } else {
            const ElementRef target =
                resolve_element(*parent.elab->def, b.expr, {}, program_.file);
            parent.values[parent.slot(target.source_name())] =
                resize(st.values[port_slot].bits, target.decl->width);
          }
          break;
        }
      }
    }
  }

  CycleState snapshot() const {
    CycleState out;
    for (const InstanceState& st : states_) {
      for (size_t s = 0; s < st.slots.size(); ++s) {
        const auto& [decl, k] = st.slots[s];
        out.values[st.elab->path + "." + decl->rtl_element(k)] = st.values[s];
      }
    }
    return out;
  }

  void clock_edge() {
    std::vector<std::vector<Value>> next(states_.size());
    for (size_t i = 0; i < states_.size(); ++i) {
      InstanceState& st = states_[i];
      next[i] = st.values;
      for (const Block& block : st.elab->def->blocks) {
        if (block.kind != Block::Kind::kSeq) continue;
        BlockRun run{st, block, &next[i], {}, {}, {}};
        exec(run, block.body);
      }
    }
    for (size_t i = 0; i < states_.size(); ++i) {
      InstanceState& st = states_[i];
      auto rst = st.by_source.find("rst");
      const bool in_reset = rst != st.by_source.end() && st.values[rst->second].bits == 1;
      for (size_t s = 0; s < st.slots.size(); ++s) {
        const VarDecl* decl = st.slots[s].first;
        if (decl->kind != VarKind::kReg) continue;
        st.values[s] = (in_reset && decl->reset) ? Value::make(*decl->reset, decl->width)
                                                 : next[i][s];
      }
    }
  }

  // Execution context of one block.
  struct BlockRun {
    InstanceState& st;
    const Block& block;
    std::vector<Value>* next;  // seq blocks write here; comb blocks write in place
    LoopEnv env;
    std::vector<std::pair<uint64_t, uint64_t>> loops;  // (iteration, trip count)
    std::set<size_t> defined;
  };

  Value read(BlockRun& run, const Expr& id) {
    if (!id.indexed) {
      if (auto lv = loop_value(run.env, id.name)) return loop_var_value(*lv);
    }
    const ElementRef r = resolve_element(*run.st.elab->def, id, run.env, program_.file);
    return run.st.values[run.st.slot(r.source_name())];
  }

  std::vector<NamedValue> scope_values(BlockRun& run) {
    std::vector<NamedValue> out;
    for (const auto& [name, v] : run.env) out.push_back({name, loop_var_value(v)});
    for (const std::string& name : scopes_.at(&run.block)) {
      const size_t slot = run.st.slot(name);
      const VarDecl* decl = run.st.slots[slot].first;
      const bool assigned_here = run.block.kind == Block::Kind::kComb &&
                                 (decl->kind == VarKind::kWire || decl->kind == VarKind::kOutput) &&
                                 assigned_in_block(run, slot);
      if (assigned_here && !run.defined.count(slot)) continue;
      out.push_back({name, run.st.values[slot]});
    }
    return out;
  }

  // Slots are laid out per module definition, so one set per block serves
  // every instance of the module.
  bool assigned_in_block(BlockRun& run, size_t slot) {
    auto it = assigned_.find(&run.block);
    if (it == assigned_.end()) {
      std::set<size_t> slots;
      LoopEnv env;
      std::function<void(const std::vector<Stmt>&)> walk = [&](const std::vector<Stmt>& stmts) {
        for (const Stmt& s : stmts) {
          switch (s.kind) {
            case Stmt::Kind::kAssign:
              slots.insert(run.st.slot(
                  resolve_element(*run.st.elab->def, s.target, env, program_.file).source_name()));
              break;
            case Stmt::Kind::kIf:
              walk(s.then_body);
              walk(s.else_body);
              break;
            case Stmt::Kind::kFor:
              for (uint64_t i = s.lo; i < s.hi; ++i) {
                env.emplace_back(s.loop_var, i);
                walk(s.body);
                env.pop_back();
              }
              break;
            case Stmt::Kind::kBlock:
              walk(s.body);
              break;
          }
        }
      };
      walk(run.block.body);
      it = assigned_.emplace(&run.block, std::move(slots)).first;
    }
    return it->second.count(slot) > 0;
  }

  uint32_t ordinal(const BlockRun& run) const {
    uint64_t o = 0;
    for (const auto& [iteration, trips] : run.loops) o = o * trips + iteration;
    return static_cast<uint32_t>(o);
  }

  void exec(BlockRun& run, const std::vector<Stmt>& stmts) {
    for (const Stmt& s : stmts) {
      switch (s.kind) {
        case Stmt::Kind::kAssign: {
          StmtExecution entry;
          entry.cycle = cycle_;
          entry.instance = run.st.elab->path;
          entry.loc = s.loc;
          entry.ordinal = ordinal(run);
          entry.pre = scope_values(run);
          const Value v = eval_design(s.value, [&](const Expr& id) { return read(run, id); });
          const ElementRef target =
              resolve_element(*run.st.elab->def, s.target, run.env, program_.file);
          const size_t slot = run.st.slot(target.source_name());
          const Value stored = resize(v.bits, target.decl->width);
          if (run.next != nullptr) {
            (*run.next)[slot] = stored;
          } else {
            run.st.values[slot] = stored;
            run.defined.insert(slot);
          }
          // Registers keep their visible value until the edge, so `post`
          // only differs from `pre` for combinational targets.
          entry.post = scope_values(run);
          log_->push_back(std::move(entry));
          break;
        }
        case Stmt::Kind::kIf: {
          const Value c = eval_design(s.cond, [&](const Expr& id) { return read(run, id); });
          exec(run, c.bits != 0 ? s.then_body : s.else_body);
          break;
        }
        case Stmt::Kind::kFor: {
          const uint64_t trips = s.hi > s.lo ? s.hi - s.lo : 0;
          for (uint64_t i = s.lo; i < s.hi; ++i) {
            run.env.emplace_back(s.loop_var, i);
            run.loops.emplace_back(i - s.lo, trips);
            exec(run, s.body);
            run.loops.pop_back();
            run.env.pop_back();
          }
          break;
        }
        case Stmt::Kind::kBlock:
          exec(run, s.body);
          break;
      }
    }
  }

  const SourceProgram& program_;
  ElaboratedDesign design_;
  std::vector<InstanceState> states_;
  std::unordered_map<const Block*, std::vector<std::string>> scopes_;
  std::unordered_map<const Block*, std::set<size_t>> assigned_;
  uint64_t cycle_ = 0;
  std::vector<StmtExecution>* log_ = nullptr;
};

}  // namespace

ExecutionTrace interpret(const SourceProgram& program, const std::vector<InputMap>& stimulus) {
  return Interpreter(program).run(stimulus);
}

std::vector<std::pair<std::string, uint32_t>> stimulus_inputs(const SourceProgram& program) {
  std::vector<std::pair<std::string, uint32_t>> out;
  for (const auto& v : program.top_module().vars) {
    if (v.kind != VarKind::kInput) continue;
    for (uint32_t k = 0; k < v.element_count(); ++k) out.emplace_back(v.element(k), v.width);
  }
  return out;
}

std::vector<InputMap> parse_stimulus(std::string_view text, const SourceProgram& program,
                                     std::optional<uint64_t> cycles) {
  const auto inputs = stimulus_inputs(program);
  std::map<uint64_t, InputMap> assigned;
  uint64_t last_cycle = 0;
  bool any = false;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line.erase(std::remove_if(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
               line.end());
    if (line.empty()) continue;
    auto fail = [&](const std::string& message) {
      throw Error("stimulus line " + std::to_string(line_no) + ": " + message);
    };
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    auto cycle = parse_uint(fields.empty() ? "" : fields[0]);
    if (!cycle) fail("expected a cycle number");
    last_cycle = std::max(last_cycle, *cycle);
    any = true;
    for (size_t i = 1; i < fields.size(); ++i) {
      const auto eq = fields[i].find('=');
      if (eq == std::string::npos) fail("expected name=value");
      const std::string name = fields[i].substr(0, eq);
      auto value = parse_uint(fields[i].substr(eq + 1));
      if (!value) fail("bad value for '" + name + "'");
      auto it = std::find_if(inputs.begin(), inputs.end(),
                             [&](const auto& p) { return p.first == name; });
      if (it == inputs.end()) fail("unknown input '" + name + "'");
      if ((*value & ~width_mask(it->second)) != 0) {
        fail("value " + std::to_string(*value) + " does not fit " + std::to_string(it->second) +
             "-bit input '" + name + "'");
      }
      assigned[*cycle][name] = Value::make(*value, it->second);
    }
  }
  const uint64_t count = cycles ? *cycles : (any ? last_cycle + 1 : 0);
  std::vector<InputMap> out;
  InputMap current;
  for (const auto& [name, width] : inputs) current[name] = Value::make(0, width);
  for (uint64_t c = 0; c < count; ++c) {
    if (auto it = assigned.find(c); it != assigned.end()) {
      for (const auto& [name, v] : it->second) current[name] = v;
    }
    out.push_back(current);
  }
  return out;
}

}  // namespace hwdbg
