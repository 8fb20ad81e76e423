#include "hwdbg/runtime.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>

#include "hwdbg/frontend.hpp"

namespace hwdbg {

std::string to_string(const SourceKey& key) {
  std::string out = key.file + ":" + std::to_string(key.line);
  if (key.column > 0) out += ":" + std::to_string(key.column);
  if (key.ordinal > 0) out += "#" + std::to_string(key.ordinal);
  return out;
}

std::string_view to_string(ResumeCommand c) {
  switch (c) {
    case ResumeCommand::kContinue: return "continue";
    case ResumeCommand::kStepOver: return "step-over";
    case ResumeCommand::kReverseContinue: return "reverse-continue";
    case ResumeCommand::kReverseStep: return "reverse-step";
  }
  return "?";
}

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::kStarting: return "starting";
    case RunMode::kRunning: return "running";
    case RunMode::kPaused: return "paused";
    case RunMode::kEnded: return "ended";
  }
  return "?";
}

std::vector<VarNode> group_variables(const std::vector<FrameValue>& flat) {
  std::vector<VarNode> roots;
  for (const FrameValue& fv : flat) {
    // `io.d[1]` -> io, d, [1]
    std::vector<std::pair<std::string, bool>> parts;
    size_t start = 0;
    const std::string& n = fv.name;
    while (start <= n.size()) {
      size_t end = n.find_first_of(".[", start);
      if (end == std::string::npos) end = n.size();
      if (end > start) parts.emplace_back(n.substr(start, end - start), false);
      if (end < n.size() && n[end] == '[') {
        const size_t close = n.find(']', end);
        if (close == std::string::npos) break;
        parts.emplace_back(n.substr(end + 1, close - end - 1), true);
        start = close + 1;
        if (start < n.size() && n[start] == '.') ++start;
      } else {
        start = end + 1;
      }
    }
    std::vector<VarNode>* level = &roots;
    VarNode* node = nullptr;
    for (const auto& [part, is_index] : parts) {
      if (node != nullptr && is_index) node->is_array = true;
      auto it = std::find_if(level->begin(), level->end(),
                             [&](const VarNode& v) { return v.name == part; });
      if (it == level->end()) {
        level->push_back(VarNode{part, false, std::nullopt, {}});
        it = std::prev(level->end());
      }
      node = &*it;
      level = &node->members;
    }
    if (node != nullptr) node->leaf = fv;
  }
  return roots;
}

namespace {

bool is_reverse(ResumeCommand c) {
  return c == ResumeCommand::kReverseContinue || c == ResumeCommand::kReverseStep;
}

bool is_step(ResumeCommand c) {
  return c == ResumeCommand::kStepOver || c == ResumeCommand::kReverseStep;
}

// Loop variables are stored as their decimal value.
std::optional<uint64_t> constant_name(const std::string& rtl_name) {
  if (rtl_name.empty() || !std::isdigit(static_cast<unsigned char>(rtl_name[0]))) {
    return std::nullopt;
  }
  return parse_uint(rtl_name);
}

}  // namespace

// ---------------------------------------------------------------------------

DebuggerCore::DebuggerCore(SimHandle& sim, const SymbolTable& table, HierarchyMap map)
    : sim_(sim), table_(table), map_(std::move(map)) {
  if (sim_.clocks().empty()) throw Error("no clock found in the simulation");
  callback_ = sim_.on_clock_edge([this](uint64_t t) { on_edge(t); });
}

DebuggerCore::~DebuggerCore() { sim_.remove_callback(callback_); }

HierarchyMap DebuggerCore::locate(const SimHandle& sim, const SymbolTable& table,
                                  std::vector<std::string>* warnings) {
  std::vector<std::string> paths;
  for (const auto& i : table.instances) paths.push_back(i.name);
  std::vector<std::string> signals;
  for (const auto& v : table.variables) {
    if (!constant_name(v.rtl_name)) signals.push_back(v.rtl_name);
  }
  return map_hierarchy(paths, signals, sim.hierarchy(), warnings);
}

// ---------------------------------------------------------------------------
// Breakpoints

std::vector<int64_t> DebuggerCore::insert_breakpoint(const std::string& file, uint32_t line,
                                                     std::optional<uint32_t> column,
                                                     const std::string& condition) {
  const auto matched = table_.match_file(file);
  if (!matched) throw Error("no source file matches '" + file + "'");
  const auto rows = table_.breakpoints_at(*matched, line, column);
  if (rows.empty()) {
    throw Error("no breakpoint at " + *matched + ":" + std::to_string(line) +
                (column ? ":" + std::to_string(*column) : ""));
  }
  std::optional<Expr> cond;
  if (!condition.empty()) cond = parse_expr(condition, "<condition>");

  auto resolver = [this](const std::string& text) -> std::optional<size_t> {
    return slot_for(text);
  };
  std::vector<Member> fresh;
  for (const BreakpointRow& row : rows) {
    Member m;
    m.bp.row = row;
    m.bp.condition = condition;
    const InstanceRow* inst = table_.instance(row.instance_id);
    m.bp.instance = inst != nullptr ? inst->name : "";
    try {
      m.enable = BoundExpr::bind(parse_expr(row.enable, "<enable>"),
                                 [&](std::string_view n) { return resolver(std::string(n)); });
    } catch (const Error& e) {
      m.enable_ok = false;
      diagnostics_.push_back("breakpoint " + std::to_string(row.id) + ": " + e.what());
    }
    if (cond) {
      m.condition = BoundExpr::bind(*cond, [&](std::string_view n) {
        return slot_for(resolve_name(std::string(n), row.id, row.instance_id));
      });
    }
    fresh.push_back(std::move(m));
  }

  std::vector<int64_t> ids;
  for (Member& m : fresh) {
    ids.push_back(m.bp.row.id);
    auto it = std::find_if(members_.begin(), members_.end(),
                           [&](const Member& x) { return x.bp.row.id == m.bp.row.id; });
    if (it != members_.end()) {
      *it = std::move(m);
    } else {
      members_.push_back(std::move(m));
    }
  }
  rebuild_groups();
  return ids;
}

bool DebuggerCore::remove_breakpoint(int64_t id) {
  auto it = std::find_if(members_.begin(), members_.end(),
                         [&](const Member& m) { return m.bp.row.id == id; });
  if (it == members_.end()) return false;
  members_.erase(it);
  rebuild_groups();
  return true;
}

size_t DebuggerCore::remove_breakpoints_at(const std::string& file, uint32_t line) {
  const auto matched = table_.match_file(file);
  if (!matched) return 0;
  const size_t before = members_.size();
  std::erase_if(members_, [&](const Member& m) {
    return m.bp.row.file == *matched && m.bp.row.line == line;
  });
  const size_t removed = before - members_.size();
  if (removed > 0) rebuild_groups();
  return removed;
}

std::vector<InsertedBreakpoint> DebuggerCore::breakpoints() const {
  std::vector<InsertedBreakpoint> out;
  for (const Member& m : members_) out.push_back(m.bp);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.row.id < b.row.id; });
  return out;
}

// Groups sort by source key, which is the order_index order within a file.
void DebuggerCore::rebuild_groups() {
  std::map<SourceKey, std::vector<size_t>> by_key;
  for (size_t i = 0; i < members_.size(); ++i) {
    const BreakpointRow& r = members_[i].bp.row;
    by_key[SourceKey{r.file, r.line, r.column, r.ordinal}].push_back(i);
  }
  groups_.clear();
  for (auto& [key, idx] : by_key) {
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return members_[a].bp.row.order_index < members_[b].bp.row.order_index;
    });
    groups_.push_back(Group{key, std::move(idx)});
  }
  refresh_fast_path();
}

int DebuggerCore::group_position(const SourceKey& key, bool reverse, bool& exact) const {
  auto it = std::lower_bound(groups_.begin(), groups_.end(), key,
                             [](const Group& g, const SourceKey& k) { return g.key < k; });
  const int idx = static_cast<int>(it - groups_.begin());
  exact = it != groups_.end() && it->key == key;
  if (exact || reverse) return idx;
  return idx - 1;
}

// ---------------------------------------------------------------------------
// Values

std::optional<size_t> DebuggerCore::slot_for(const std::string& rtl_name) const {
  auto it = slot_index_.find(rtl_name);
  if (it != slot_index_.end()) return it->second;
  Slot s;
  if (auto c = constant_name(rtl_name)) {
    s.constant = loop_var_value(*c);
  } else {
    auto id = sim_.resolve(map_.apply(rtl_name));
    if (!id) return std::nullopt;
    s.signal = *id;
  }
  slots_.push_back(s);
  slot_index_.emplace(rtl_name, slots_.size() - 1);
  return slots_.size() - 1;
}

Value DebuggerCore::fetch(size_t slot) const {
  const Slot& s = slots_[slot];
  return s.constant ? *s.constant : sim_.get_value(s.signal);
}

std::optional<Value> DebuggerCore::read_rtl(const std::string& rtl_name) const {
  auto slot = slot_for(rtl_name);
  if (!slot) return std::nullopt;
  return fetch(*slot);
}

int64_t DebuggerCore::thread_instance(const std::string& thread) const {
  if (!thread.empty()) {
    const InstanceRow* inst = table_.instance_by_name(thread);
    if (inst == nullptr) throw Error("unknown thread '" + thread + "'");
    return inst->id;
  }
  if (stop_ && !stop_->frames.empty()) {
    const InstanceRow* inst = table_.instance_by_name(stop_->frames.front().thread);
    if (inst != nullptr) return inst->id;
  }
  const InstanceRow* top = nullptr;
  for (const auto& i : table_.instances) {
    if (top == nullptr || i.name.size() < top->name.size()) top = &i;
  }
  return top != nullptr ? top->id : 0;
}

int64_t DebuggerCore::context_breakpoint(const std::string& thread) const {
  if (!stop_ || stop_->frames.empty()) return 0;
  if (thread.empty()) return stop_->frames.front().breakpoint_id;
  for (const auto& f : stop_->frames) {
    if (f.thread == thread) return f.breakpoint_id;
  }
  return 0;
}

std::string DebuggerCore::resolve_name(const std::string& name, int64_t bp,
                                       int64_t instance_id) const {
  try {
    if (bp != 0) return table_.resolve_scoped(bp, name);
    if (instance_id != 0) return table_.resolve_instance(instance_id, name);
  } catch (const Error&) {
  }
  if (sim_.resolve(map_.apply(name))) return name;
  throw ExprError("'" + name + "' is not visible here");
}

FrameSnapshot DebuggerCore::build_frame(int64_t breakpoint_id) const {
  const BreakpointRow* row = table_.breakpoint(breakpoint_id);
  if (row == nullptr) throw Error("unknown breakpoint " + std::to_string(breakpoint_id));
  FrameSnapshot f;
  const InstanceRow* inst = table_.instance(row->instance_id);
  f.thread = inst != nullptr ? inst->name : "";
  f.breakpoint_id = breakpoint_id;
  f.key = SourceKey{row->file, row->line, row->column, row->ordinal};
  f.time = sim_.time();
  auto value_of = [&](const std::string& name, const VariableRow& v) {
    const bool constant = constant_name(v.rtl_name).has_value();
    return FrameValue{name, constant ? v.rtl_name : map_.apply(v.rtl_name), read_rtl(v.rtl_name)};
  };
  for (const auto& [name, v] : table_.scope_of(breakpoint_id)) f.locals.push_back(value_of(name, v));
  for (const auto& [name, v] : table_.instance_variables(row->instance_id)) {
    f.instance_vars.push_back(value_of(name, v));
  }
  return f;
}

Value DebuggerCore::evaluate(const std::string& text, const std::string& thread) const {
  const Expr e = parse_expr(text);
  const int64_t instance_id = thread_instance(thread);
  const int64_t bp = context_breakpoint(thread);
  return eval(e, [&](std::string_view n) -> std::optional<Value> {
    const std::string name(n);
    auto v = read_rtl(resolve_name(name, bp, instance_id));
    if (!v) throw ExprError("'" + name + "' is unavailable");
    return v;
  });
}

void DebuggerCore::set_value(const std::string& name, const Value& v, const std::string& thread) {
  if (!sim_.can_set_value()) throw CapabilityError("the backend cannot set signal values");
  const std::string rtl = resolve_name(name, context_breakpoint(thread), thread_instance(thread));
  if (constant_name(rtl)) throw Error("'" + name + "' is a loop variable and cannot be set");
  sim_.set_value(map_.apply(rtl), v);
}

void DebuggerCore::set_time(uint64_t t) {
  if (!sim_.can_set_time()) throw CapabilityError("the backend cannot change simulation time");
  sim_.set_time(t);
  time_jumped_ = true;
  stop_.reset();
}

// ---------------------------------------------------------------------------
// Scheduling

void DebuggerCore::emit(CoreEvent e) {
  if (listener_) listener_(e);
}

void DebuggerCore::refresh_fast_path() {
  std::lock_guard lock(mutex_);
  attention_.store(!groups_.empty() || !tasks_.empty() || step_pending_ || pause_requested_.load(),
                   std::memory_order_relaxed);
}

void DebuggerCore::post(Task task) {
  {
    std::lock_guard lock(mutex_);
    tasks_.push_back(std::move(task));
    attention_.store(true, std::memory_order_relaxed);
  }
  cv_.notify_all();
}

void DebuggerCore::request_pause() {
  pause_requested_.store(true);
  attention_.store(true, std::memory_order_relaxed);
}

void DebuggerCore::run_tasks(bool until_resume) {
  for (;;) {
    if (until_resume && (resume_ || detached_)) return;
    Task task;
    {
      std::unique_lock lock(mutex_);
      if (!until_resume && tasks_.empty()) return;
      cv_.wait(lock, [&] { return !tasks_.empty(); });
      task = std::move(tasks_.front());
      tasks_.pop_front();
    }
    try {
      task(*this);
    } catch (const std::exception& e) {
      diagnostics_.push_back(std::string("task failed: ") + e.what());
    }
  }
}

void DebuggerCore::resume(ResumeCommand c) {
  if (mode_ == RunMode::kRunning) throw Error("the simulation is running");
  resume_ = c;
  CoreEvent e;
  e.kind = CoreEvent::Kind::kResumed;
  e.stop_id = stop_ ? stop_->id : 0;
  emit(e);
}

void DebuggerCore::pause_until_resume() {
  mode_ = RunMode::kPaused;
  resume_.reset();
  run_tasks(true);
  mode_ = RunMode::kRunning;
  const ResumeCommand c = resume_.value_or(ResumeCommand::kContinue);
  reverse_ = is_reverse(c);
  stepping_ = is_step(c);
}

bool DebuggerCore::member_fires(const Member& m) {
  if (!m.enable_ok) return false;
  try {
    auto fetcher = [this](size_t slot) { return fetch(slot); };
    if (!truthy(m.enable.eval(fetcher))) return false;
    return m.condition.empty() || truthy(m.condition.eval(fetcher));
  } catch (const Error& e) {
    diagnostics_.push_back("breakpoint " + std::to_string(m.bp.row.id) + ": " + e.what());
    return false;
  }
}

void DebuggerCore::on_edge(uint64_t) {
  ++edges_;
  if (!attention_.load(std::memory_order_relaxed)) return;
  mode_ = RunMode::kRunning;
  time_jumped_ = false;
  run_tasks(false);
  if (detached_ || time_jumped_) {
    time_jumped_ = false;
    refresh_fast_path();
    return;
  }
  if (pause_requested_.exchange(false)) step_pending_ = true;
  reverse_ = false;
  stepping_ = step_pending_;
  step_pending_ = false;
  if (!groups_.empty()) drive(-1);
  refresh_fast_path();
}

void DebuggerCore::drive(int pos) {
  for (;;) {
    if (detached_) return;
    const int n = static_cast<int>(groups_.size());
    const int next = reverse_ ? pos - 1 : pos + 1;
    if (!reverse_ && next >= n) {
      if (stepping_) step_pending_ = true;
      return;
    }
    if (reverse_ && next < 0) {
      std::optional<uint64_t> prev;
      if (sim_.can_set_time()) prev = sim_.previous_edge(sim_.time());
      if (prev && n > 0) {
        sim_.set_time(*prev);
        pos = n;
        continue;
      }
      CoreEvent notice;
      notice.text = sim_.can_set_time() ? "reached the beginning of the simulation"
                                        : "reverse execution is limited to the current cycle";
      stop_.reset();
      emit(notice);
      pos = -1;
    } else {
      pos = next;
      const Group& g = groups_[static_cast<size_t>(pos)];
      std::vector<FrameSnapshot> frames;
      for (size_t i : g.members) {
        const bool fired = member_fires(members_[i]);
        if (!fired && !stepping_) continue;
        frames.push_back(build_frame(members_[i].bp.row.id));
        frames.back().fired = fired;
      }
      if (frames.empty()) continue;
      std::sort(frames.begin(), frames.end(),
                [](const auto& a, const auto& b) { return a.thread < b.thread; });
      StopEvent stop;
      stop.id = next_stop_id_++;
      stop.time = sim_.time();
      stop.key = g.key;
      stop.reverse = reverse_;
      stop.frames = std::move(frames);
      cursor_ = g.key;
      stop_ = std::move(stop);
      CoreEvent e;
      e.kind = CoreEvent::Kind::kStopped;
      e.stop = &*stop_;
      emit(e);
    }

    const bool at_boundary = pos < 0;
    time_jumped_ = false;
    pause_until_resume();
    if (detached_) return;
    if (time_jumped_) {
      time_jumped_ = false;
      if (!reverse_) return;
      // Continue backwards from the last edge at or before the new time.
      const auto t = sim_.time();
      const auto edge = t == std::numeric_limits<uint64_t>::max() ? sim_.previous_edge(t)
                                                                   : sim_.previous_edge(t + 1);
      if (edge) {
        sim_.set_time(*edge);
        pos = static_cast<int>(groups_.size());
      } else {
        pos = 0;  // reports the boundary
      }
      continue;
    }
    if (!at_boundary) {
      bool exact = false;
      pos = group_position(cursor_, reverse_, exact);
    }
  }
}

// ---------------------------------------------------------------------------
// Session driver

void DebuggerCore::detach() {
  detached_ = true;
  members_.clear();
  groups_.clear();
  resume_ = ResumeCommand::kContinue;
  sim_.request_stop();
  cv_.notify_all();
}

void DebuggerCore::serve() {
  auto idle = [&](RunMode m) {
    mode_ = m;
    resume_.reset();
    run_tasks(true);
    return resume_.value_or(ResumeCommand::kContinue);
  };
  auto notice = [&](std::string text) {
    CoreEvent e;
    e.text = std::move(text);
    emit(e);
  };

  time_jumped_ = false;
  ResumeCommand cmd = idle(RunMode::kStarting);
  bool ended = false;
  while (!detached_) {
    if (is_reverse(cmd)) {
      std::optional<uint64_t> last;
      if (ended && sim_.can_set_time()) last = sim_.previous_edge(std::numeric_limits<uint64_t>::max());
      if (!last) {
        notice(ended ? "reverse execution needs a backend that can set time"
                     : "reached the beginning of the simulation");
        cmd = idle(mode_);
        continue;
      }
      sim_.set_time(*last);
      reverse_ = true;
      stepping_ = is_step(cmd);
      mode_ = RunMode::kRunning;
      time_jumped_ = false;
      drive(static_cast<int>(groups_.size()));
      if (detached_) break;
    } else if (ended && !time_jumped_) {
      notice("the simulation has ended");
      cmd = idle(RunMode::kEnded);
      continue;
    } else {
      step_pending_ = is_step(cmd);
    }
    time_jumped_ = false;
    mode_ = RunMode::kRunning;
    refresh_fast_path();
    sim_.run();
    if (detached_) break;
    ended = true;
    stop_.reset();
    CoreEvent e;
    e.kind = CoreEvent::Kind::kEnded;
    emit(e);
    time_jumped_ = false;
    cmd = idle(RunMode::kEnded);
  }
  mode_ = RunMode::kEnded;
}

}  // namespace hwdbg
