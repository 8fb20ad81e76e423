#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hwdbg/frontend.hpp"
#include "hwdbg/netlist.hpp"
#include "hwdbg/value.hpp"

namespace hwdbg {

// Raised when a backend lacks the capability an operation needs.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

struct HierNode {
  std::string name;  // leaf scope name; empty for the root
  std::string path;  // dotted path; empty for the root
  std::vector<std::string> signals;  // leaf signal names
  std::vector<HierNode> children;

  const HierNode* find(std::string_view path) const;
  HierNode& child(const std::string& leaf);
  // Adds `a.b.sig` as signal `sig` of scope `a.b`, creating scopes.
  void add_signal(std::string_view dotted_name);
};

// Unified simulator interface: values, hierarchy, clocks, time and edge
// callbacks. Signal ids from resolve() are stable for the handle's lifetime.
class SimHandle {
 public:
  using EdgeCallback = std::function<void(uint64_t time)>;

  virtual ~SimHandle() = default;

  virtual bool can_set_value() const = 0;
  virtual bool can_set_time() const = 0;
  virtual std::vector<std::string> clocks() const = 0;
  virtual HierNode hierarchy() const = 0;
  virtual std::optional<int> resolve(std::string_view name) const = 0;
  virtual Value get_value(int signal) const = 0;
  virtual uint64_t time() const = 0;

  // Throws Error for unknown names.
  Value get_value(std::string_view name) const;

  virtual void set_time(uint64_t t);
  virtual void set_value(std::string_view name, const Value& v);
  // Latest rising edge strictly before t, for backends that can move time.
  virtual std::optional<uint64_t> previous_edge(uint64_t t) const;

  int on_clock_edge(EdgeCallback cb);
  void remove_callback(int id);

  // Drives the simulation to its end, invoking callbacks synchronously at
  // every rising edge. Returns the number of edges seen.
  virtual uint64_t run() = 0;
  // Makes run() return after the current edge. Safe from any thread.
  void request_stop() { stop_.store(true); }

 protected:
  void fire_edge(uint64_t t);
  bool stop_requested() const { return stop_.load(std::memory_order_relaxed); }
  void clear_stop() { stop_.store(false); }

 private:
  std::map<int, EdgeCallback> callbacks_;
  int next_callback_ = 0;
  std::atomic<bool> stop_{false};
};

// ---------------------------------------------------------------------------
// Traces

struct TraceSignal {
  std::string name;  // dotted hierarchical name
  uint32_t width = 1;
  std::vector<std::pair<uint64_t, Value>> changes;  // strictly increasing time

  bool operator==(const TraceSignal&) const = default;
};

struct TraceStore {
  std::string timescale = "1ns";
  std::vector<TraceSignal> signals;
  std::vector<std::pair<std::string, size_t>> aliases;  // extra names sharing a signal
  uint64_t end_time = 0;

  std::optional<size_t> find(std::string_view name) const;
  bool operator==(const TraceStore&) const;
};

// Throws Error with a line number for malformed input.
TraceStore parse_vcd_text(std::string_view text);
TraceStore parse_vcd(const std::string& path);
// Deterministic VCD text.
std::string write_vcd(const TraceStore& trace);

// ---------------------------------------------------------------------------
// Cycle simulator over a netlist. Each cycle spans 10 ticks: inputs change
// and the clock rises at 10k, registers update at 10k+1, the clock falls at
// 10k+5.

class CycleSim : public SimHandle {
 public:
  static constexpr uint64_t kPeriod = 10;

  // Stimulus is keyed by top-level source element names; run() simulates
  // stimulus.size() cycles, or `cycles` when given (holding the last inputs).
  CycleSim(const Netlist& netlist, std::vector<InputMap> stimulus,
           std::optional<uint64_t> cycles = std::nullopt);

  bool can_set_value() const override { return true; }
  bool can_set_time() const override { return false; }
  std::vector<std::string> clocks() const override;
  HierNode hierarchy() const override;
  std::optional<int> resolve(std::string_view name) const override;
  Value get_value(int signal) const override;
  using SimHandle::get_value;
  uint64_t time() const override { return time_; }
  // Inputs and registers only; the change is visible to the next read.
  void set_value(std::string_view name, const Value& v) override;
  uint64_t run() override;

  // Records every net change during run() for dump_vcd.
  void enable_trace(std::string root = "");
  const TraceStore& trace() const { return trace_; }

  const Netlist& netlist() const { return netlist_; }

 private:
  void settle() const;
  void apply_inputs(uint64_t cycle);
  void record(uint64_t t);

  const Netlist& netlist_;
  std::vector<InputMap> stimulus_;
  uint64_t cycles_;
  std::vector<int> order_;
  std::vector<bool> settable_;
  std::unordered_map<std::string, int> inputs_by_source_;
  mutable std::vector<uint64_t> values_;
  mutable bool dirty_ = true;
  uint64_t time_ = 0;
  bool tracing_ = false;
  std::string trace_root_;
  TraceStore trace_;
  std::vector<std::optional<uint64_t>> last_recorded_;
};

// Writes the trace recorded by a CycleSim run.
void dump_vcd(const CycleSim& sim, const std::string& path);

// ---------------------------------------------------------------------------
// Read-only replay of a recorded trace.

class VcdReplay : public SimHandle {
 public:
  // Clocks are signals whose leaf name is `clk` or `clock`, unless
  // `clock_names` lists them explicitly.
  explicit VcdReplay(TraceStore trace, std::vector<std::string> clock_names = {});
  // Replays sharing one immutable trace.
  explicit VcdReplay(std::shared_ptr<const TraceStore> trace, std::vector<std::string> clock_names = {});

  bool can_set_value() const override { return false; }
  bool can_set_time() const override { return true; }
  std::vector<std::string> clocks() const override { return clocks_; }
  HierNode hierarchy() const override;
  std::optional<int> resolve(std::string_view name) const override;
  Value get_value(int signal) const override;
  using SimHandle::get_value;
  uint64_t time() const override { return time_; }
  void set_time(uint64_t t) override;
  std::optional<uint64_t> previous_edge(uint64_t t) const override;
  uint64_t run() override;
  // Back to before the first edge with any stop request cleared; the next
  // run() replays the whole trace.
  void rewind();

  const std::vector<uint64_t>& edges() const { return edges_; }
  const TraceStore& trace() const { return *trace_; }

 private:
  struct Change {
    uint64_t time;
    uint32_t signal;
    uint32_t index;  // into the signal's changes
  };

  // Forward moves apply changes in order; backward moves rebuild the
  // current values by search.
  void seek(uint64_t t);

  std::shared_ptr<const TraceStore> trace_;
  std::vector<std::string> clocks_;
  std::vector<uint64_t> edges_;
  std::vector<Change> changes_;  // every change, by time
  size_t applied_ = 0;           // changes_[0, applied_) are reflected in current_
  std::vector<Value> current_;
  uint64_t time_ = 0;
  std::optional<uint64_t> cursor_;
};

// ---------------------------------------------------------------------------
// Hierarchy mapping from generated-design names to backend names.

struct HierarchyMap {
  std::string from;  // symbol-table top, e.g. `top`
  std::string to;    // backend path, e.g. `tb.dut`

  std::string apply(std::string_view name) const;
};

// Finds the backend scope whose subtree contains every symbol instance,
// preferring the candidate with the most matching signal names, then the
// lexicographically smallest path. Throws Error when nothing matches.
HierarchyMap map_hierarchy(const std::vector<std::string>& instance_paths,
                           const std::vector<std::string>& signal_names, const HierNode& backend,
                           std::vector<std::string>* warnings = nullptr);

}  // namespace hwdbg
