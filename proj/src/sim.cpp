#include "hwdbg/sim.hpp"

#include <algorithm>
#include <fstream>

namespace hwdbg {

const HierNode* HierNode::find(std::string_view p) const {
  if (p == path) return this;
  for (const auto& c : children) {
    if (p.size() >= c.path.size() && p.compare(0, c.path.size(), c.path) == 0 &&
        (p.size() == c.path.size() || p[c.path.size()] == '.')) {
      return c.find(p);
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// SimHandle

Value SimHandle::get_value(std::string_view name) const {
  auto id = resolve(name);
  if (!id) throw Error("unknown signal '" + std::string(name) + "'");
  return get_value(*id);
}

void SimHandle::set_time(uint64_t) {
  throw CapabilityError("this backend cannot change simulation time");
}

void SimHandle::set_value(std::string_view, const Value&) {
  throw CapabilityError("this backend cannot set signal values");
}

std::optional<uint64_t> SimHandle::previous_edge(uint64_t) const { return std::nullopt; }

int SimHandle::on_clock_edge(EdgeCallback cb) {
  if (clocks().empty()) throw Error("no clock to attach to");
  const int id = next_callback_++;
  callbacks_.emplace(id, std::move(cb));
  return id;
}

void SimHandle::remove_callback(int id) { callbacks_.erase(id); }

void SimHandle::fire_edge(uint64_t t) {
  if (callbacks_.empty()) return;
  if (callbacks_.size() == 1) {
    callbacks_.begin()->second(t);
    return;
  }
  std::vector<int> ids;
  for (const auto& [id, cb] : callbacks_) ids.push_back(id);
  for (int id : ids) {
    auto it = callbacks_.find(id);
    if (it != callbacks_.end()) it->second(t);
  }
}

HierNode& HierNode::child(const std::string& leaf) {
  for (auto& c : children) {
    if (c.name == leaf) return c;
  }
  HierNode c;
  c.name = leaf;
  c.path = path.empty() ? leaf : path + "." + leaf;
  children.push_back(std::move(c));
  return children.back();
}

void HierNode::add_signal(std::string_view full) {
  HierNode* node = this;
  size_t start = 0;
  for (size_t dot = full.find('.'); dot != std::string_view::npos; dot = full.find('.', start)) {
    node = &node->child(std::string(full.substr(start, dot - start)));
    start = dot + 1;
  }
  node->signals.emplace_back(full.substr(start));
}

// ---------------------------------------------------------------------------
// CycleSim

CycleSim::CycleSim(const Netlist& netlist, std::vector<InputMap> stimulus,
                   std::optional<uint64_t> cycles)
    : netlist_(netlist), stimulus_(std::move(stimulus)) {
  cycles_ = cycles ? *cycles : stimulus_.size();
  order_ = netlist_.topo_order();
  values_.assign(netlist_.nets.size(), 0);
  settable_.assign(netlist_.nets.size(), false);
  for (int id : netlist_.inputs) {
    settable_[static_cast<size_t>(id)] = true;
    inputs_by_source_[netlist_.net(id).source_name] = id;
  }
  for (const Register& r : netlist_.registers) {
    settable_[static_cast<size_t>(r.net)] = true;
    if (r.reset) values_[static_cast<size_t>(r.net)] = *r.reset & width_mask(netlist_.net(r.net).width);
  }
  for (int id : netlist_.clocks) values_[static_cast<size_t>(id)] = 1;
}

std::vector<std::string> CycleSim::clocks() const {
  std::vector<std::string> out;
  for (int id : netlist_.clocks) out.push_back(netlist_.net(id).name);
  return out;
}

HierNode CycleSim::hierarchy() const {
  HierNode root;
  for (const auto& inst : netlist_.instances) {
    HierNode* node = &root;
    size_t start = 0;
    const std::string& p = inst.path;
    for (;;) {
      const size_t dot = p.find('.', start);
      node = &node->child(p.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
  }
  for (const Net& n : netlist_.nets) root.add_signal(n.name);
  return root;
}

std::optional<int> CycleSim::resolve(std::string_view name) const {
  const int id = netlist_.find(name);
  if (id < 0) return std::nullopt;
  return id;
}

Value CycleSim::get_value(int signal) const {
  if (dirty_) settle();
  return Value::make(values_[static_cast<size_t>(signal)], netlist_.net(signal).width);
}

void CycleSim::set_value(std::string_view name, const Value& v) {
  const int id = netlist_.find(name);
  if (id < 0) throw Error("unknown signal '" + std::string(name) + "'");
  if (!settable_[static_cast<size_t>(id)]) {
    throw Error("'" + std::string(name) + "' is driven by logic and cannot be set");
  }
  const uint32_t width = netlist_.net(id).width;
  if (!v.known || (v.bits & ~width_mask(width)) != 0) {
    throw Error("value " + v.to_string() + " does not fit " + std::to_string(width) + "-bit '" +
                std::string(name) + "'");
  }
  values_[static_cast<size_t>(id)] = v.bits;
  dirty_ = true;
}

void CycleSim::settle() const {
  for (int id : order_) {
    const Net& n = netlist_.nets[static_cast<size_t>(id)];
    values_[static_cast<size_t>(id)] = eval_nexpr(*n.driver, values_) & width_mask(n.width);
  }
  dirty_ = false;
}

void CycleSim::apply_inputs(uint64_t cycle) {
  if (stimulus_.empty()) return;
  const InputMap& in = stimulus_[std::min<size_t>(cycle, stimulus_.size() - 1)];
  for (const auto& [name, v] : in) {
    auto it = inputs_by_source_.find(name);
    if (it == inputs_by_source_.end()) throw Error("stimulus assigns unknown input '" + name + "'");
    const uint32_t width = netlist_.net(it->second).width;
    if (!v.known || (v.bits & ~width_mask(width)) != 0) {
      throw Error("stimulus value " + v.to_string() + " does not fit input '" + name + "'");
    }
    values_[static_cast<size_t>(it->second)] = v.bits;
  }
  dirty_ = true;
}

void CycleSim::enable_trace(std::string root) {
  tracing_ = true;
  trace_root_ = std::move(root);
  trace_ = TraceStore{};
  const std::string top = netlist_.instances.empty() ? "" : netlist_.instances[0].path;
  for (const Net& n : netlist_.nets) {
    std::string name = n.name;
    if (!trace_root_.empty() && name.compare(0, top.size(), top) == 0) {
      name = trace_root_ + name.substr(top.size());
    }
    trace_.signals.push_back(TraceSignal{name, n.width, {}});
  }
  last_recorded_.assign(netlist_.nets.size(), std::nullopt);
}

void CycleSim::record(uint64_t t) {
  if (!tracing_) return;
  if (dirty_) settle();
  for (size_t i = 0; i < values_.size(); ++i) {
    if (last_recorded_[i] == values_[i]) continue;
    last_recorded_[i] = values_[i];
    trace_.signals[i].changes.emplace_back(t, Value::make(values_[i], trace_.signals[i].width));
  }
  trace_.end_time = t;
}

uint64_t CycleSim::run() {
  uint64_t edges = 0;
  std::vector<uint64_t> next(netlist_.registers.size());
  for (uint64_t c = 0; c < cycles_ && !stop_requested(); ++c) {
    time_ = c * kPeriod;
    apply_inputs(c);
    for (int id : netlist_.clocks) values_[static_cast<size_t>(id)] = 1;
    dirty_ = true;
    record(time_);
    fire_edge(time_);
    ++edges;

    if (dirty_) settle();
    for (size_t i = 0; i < netlist_.registers.size(); ++i) {
      const Register& r = netlist_.registers[i];
      const bool in_reset = r.reset && r.rst >= 0 && values_[static_cast<size_t>(r.rst)] == 1;
      next[i] = (in_reset ? *r.reset : values_[static_cast<size_t>(r.next)]) &
                width_mask(netlist_.net(r.net).width);
    }
    for (size_t i = 0; i < netlist_.registers.size(); ++i) {
      values_[static_cast<size_t>(netlist_.registers[i].net)] = next[i];
    }
    dirty_ = true;
    time_ = c * kPeriod + 1;
    record(time_);
    time_ = c * kPeriod + kPeriod / 2;
    for (int id : netlist_.clocks) values_[static_cast<size_t>(id)] = 0;
    dirty_ = true;
    record(time_);
  }
  return edges;
}

void dump_vcd(const CycleSim& sim, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << write_vcd(sim.trace());
  if (!out) throw Error("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Hierarchy mapping

std::string HierarchyMap::apply(std::string_view name) const {
  if (from == to || from.empty()) return std::string(name);
  if (name.compare(0, from.size(), from) == 0 &&
      (name.size() == from.size() || name[from.size()] == '.')) {
    return to + std::string(name.substr(from.size()));
  }
  return std::string(name);
}

HierarchyMap map_hierarchy(const std::vector<std::string>& instance_paths,
                           const std::vector<std::string>& signal_names, const HierNode& backend,
                           std::vector<std::string>* warnings) {
  if (instance_paths.empty()) throw Error("symbol table has no instances");
  const std::string top = *std::min_element(
      instance_paths.begin(), instance_paths.end(),
      [](const std::string& a, const std::string& b) { return a.size() < b.size(); });
  auto suffix_of = [&](const std::string& name) { return name.substr(top.size()); };

  struct Candidate {
    std::string path;
    size_t score = 0;
  };
  std::vector<Candidate> candidates;
  std::vector<const HierNode*> stack{&backend};
  while (!stack.empty()) {
    const HierNode* node = stack.back();
    stack.pop_back();
    for (const auto& c : node->children) stack.push_back(&c);
    if (node->path.empty()) continue;
    bool ok = true;
    for (const auto& p : instance_paths) {
      if (backend.find(node->path + suffix_of(p)) == nullptr) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    Candidate cand{node->path, 0};
    for (const auto& s : signal_names) {
      const std::string mapped = node->path + suffix_of(s);
      const auto dot = mapped.rfind('.');
      if (dot == std::string::npos) continue;
      const HierNode* scope = backend.find(mapped.substr(0, dot));
      if (scope != nullptr &&
          std::find(scope->signals.begin(), scope->signals.end(), mapped.substr(dot + 1)) !=
              scope->signals.end()) {
        ++cand.score;
      }
    }
    candidates.push_back(std::move(cand));
  }
  if (candidates.empty()) {
    throw Error("no scope in the simulation matches the design hierarchy under '" + top + "'");
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.score != b.score ? a.score > b.score : a.path < b.path;
  });
  if (candidates.size() > 1 && candidates[1].score == candidates[0].score && warnings != nullptr) {
    warnings->push_back("ambiguous design location: using '" + candidates[0].path + "', '" +
                        candidates[1].path + "' matches equally well");
  }
  return HierarchyMap{top, candidates[0].path};
}

}  // namespace hwdbg
