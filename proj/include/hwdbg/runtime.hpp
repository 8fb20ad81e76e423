#pragma once

#include <atomic>
#include <compare>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hwdbg/expr.hpp"
#include "hwdbg/sim.hpp"
#include "hwdbg/symtab.hpp"

namespace hwdbg {

// Statement occurrence shared by every instance executing it.
struct SourceKey {
  std::string file;
  uint32_t line = 0;
  uint32_t column = 0;
  uint32_t ordinal = 0;

  auto operator<=>(const SourceKey&) const = default;
  bool operator==(const SourceKey&) const = default;
};

std::string to_string(const SourceKey& key);

// A named value in a frame; `value` is empty when the backend has no such
// signal (optimized away or missing from the trace).
struct FrameValue {
  std::string name;
  std::string rtl_name;
  std::optional<Value> value;

  bool operator==(const FrameValue&) const = default;
};

struct FrameSnapshot {
  std::string thread;  // instance path
  int64_t breakpoint_id = 0;
  SourceKey key;
  uint64_t time = 0;
  bool fired = true;  // false for members reported only because of a step
  std::vector<FrameValue> locals;
  std::vector<FrameValue> instance_vars;

  bool operator==(const FrameSnapshot&) const = default;
};

// Flattened names regrouped into records and arrays: `io.a` becomes member
// `a` of `io`, `data[1]` element `1` of `data`.
struct VarNode {
  std::string name;
  bool is_array = false;
  std::optional<FrameValue> leaf;
  std::vector<VarNode> members;
};

std::vector<VarNode> group_variables(const std::vector<FrameValue>& flat);

struct StopEvent {
  uint64_t id = 0;
  uint64_t time = 0;
  SourceKey key;
  bool reverse = false;
  std::vector<FrameSnapshot> frames;  // sorted by thread
};

enum class ResumeCommand { kContinue, kStepOver, kReverseContinue, kReverseStep };

std::string_view to_string(ResumeCommand c);

enum class RunMode { kStarting, kRunning, kPaused, kEnded };

std::string_view to_string(RunMode m);

struct CoreEvent {
  enum class Kind { kStopped, kResumed, kNotice, kEnded };
  Kind kind = Kind::kNotice;
  const StopEvent* stop = nullptr;  // kStopped
  uint64_t stop_id = 0;             // kResumed
  std::string text;                 // kNotice
};

struct InsertedBreakpoint {
  BreakpointRow row;
  std::string instance;
  std::string condition;  // user condition text, empty when none
};

// Breakpoint scheduling over edge callbacks of one SimHandle. Every method
// except post() and request_pause() belongs to the thread driving the
// simulation; other threads submit work through post().
class DebuggerCore {
 public:
  using Task = std::function<void(DebuggerCore&)>;
  using Listener = std::function<void(const CoreEvent&)>;

  // Registers the edge callback. Throws Error when the backend has no clock.
  DebuggerCore(SimHandle& sim, const SymbolTable& table, HierarchyMap map);
  ~DebuggerCore();
  DebuggerCore(const DebuggerCore&) = delete;
  DebuggerCore& operator=(const DebuggerCore&) = delete;

  // Locates the design inside the backend hierarchy.
  static HierarchyMap locate(const SimHandle& sim, const SymbolTable& table,
                             std::vector<std::string>* warnings = nullptr);

  void set_listener(Listener listener) { listener_ = std::move(listener); }

  // Inserts every breakpoint row at the location. Atomic: on error nothing
  // is inserted. Re-inserting an id replaces its condition.
  std::vector<int64_t> insert_breakpoint(const std::string& file, uint32_t line,
                                         std::optional<uint32_t> column = std::nullopt,
                                         const std::string& condition = "");
  // Returns false when nothing was inserted under that id or location.
  bool remove_breakpoint(int64_t id);
  size_t remove_breakpoints_at(const std::string& file, uint32_t line);
  std::vector<InsertedBreakpoint> breakpoints() const;

  // Frame of one breakpoint built from current values.
  FrameSnapshot build_frame(int64_t breakpoint_id) const;

  // Evaluates a source-level expression. Names resolve in the scope of the
  // current stop (the given thread, else its first frame), then as instance
  // variables of the thread or top instance, then as backend signal names.
  Value evaluate(const std::string& expr, const std::string& thread = "") const;

  // Forces a value through the backend. Accepts source or backend names.
  void set_value(const std::string& name, const Value& v, const std::string& thread = "");
  // Moves backend time; the next forward resume continues from the first
  // rising edge after t.
  void set_time(uint64_t t);

  // Only valid while paused; ends the pause.
  void resume(ResumeCommand c);

  RunMode mode() const { return mode_; }
  const StopEvent* current_stop() const { return stop_ ? &*stop_ : nullptr; }
  uint64_t time() const { return sim_.time(); }
  SimHandle& sim() { return sim_; }
  const SimHandle& sim() const { return sim_; }
  const SymbolTable& table() const { return table_; }
  const HierarchyMap& hierarchy_map() const { return map_; }
  // Expression failures seen while evaluating breakpoint conditions.
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  uint64_t edges_seen() const { return edges_; }

  // Thread-safe. Tasks run on the driving thread at the next edge, or
  // immediately while paused or idle.
  void post(Task task);
  // Thread-safe. Pauses at the first breakpoint group of the next edge.
  void request_pause();

  // Drives the simulation on the calling thread until detach(): waits for a
  // first resume command, runs, then keeps serving commands after the end.
  // Reverse commands after the end re-enter a time-settable trace from its
  // last edge.
  void serve();
  // Ends serve() after the current run; clears breakpoints.
  void detach();

 private:
  struct Slot {
    int signal = -1;
    std::optional<Value> constant;
  };
  struct Member {
    InsertedBreakpoint bp;
    BoundExpr enable;
    BoundExpr condition;
    bool enable_ok = true;
  };
  struct Group {
    SourceKey key;
    std::vector<size_t> members;  // into members_
  };

  void on_edge(uint64_t t);
  // Visits groups starting after `pos` in the current direction.
  void drive(int pos);
  void pause_until_resume();
  void run_tasks(bool block_until_resume);
  void rebuild_groups();
  int group_position(const SourceKey& key, bool reverse, bool& exact) const;
  bool member_fires(const Member& m);
  void emit(CoreEvent e);
  void refresh_fast_path();

  std::optional<size_t> slot_for(const std::string& rtl_name) const;
  Value fetch(size_t slot) const;
  std::optional<Value> read_rtl(const std::string& rtl_name) const;
  int64_t context_breakpoint(const std::string& thread) const;
  std::string resolve_name(const std::string& name, int64_t bp, int64_t instance_id) const;
  int64_t thread_instance(const std::string& thread) const;

  SimHandle& sim_;
  const SymbolTable& table_;
  HierarchyMap map_;
  int callback_ = -1;
  Listener listener_;

  std::vector<Member> members_;
  std::vector<Group> groups_;
  mutable std::vector<Slot> slots_;
  mutable std::map<std::string, size_t> slot_index_;

  RunMode mode_ = RunMode::kStarting;
  bool reverse_ = false;
  bool stepping_ = false;
  bool step_pending_ = false;
  bool time_jumped_ = false;
  bool detached_ = false;
  std::optional<ResumeCommand> resume_;
  std::optional<StopEvent> stop_;
  SourceKey cursor_;
  uint64_t next_stop_id_ = 1;
  uint64_t edges_ = 0;
  std::vector<std::string> diagnostics_;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Task> tasks_;
  std::atomic<bool> pause_requested_{false};
  // False only when an edge needs no work at all.
  std::atomic<bool> attention_{false};
};

}  // namespace hwdbg
