#include "oracle.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace hwdbg::testing {

namespace {

LocalValue local(const std::string& name, const Value& v) {
  return LocalValue{name, v.width, v.known, v.known ? v.bits : 0};
}

std::string describe(const StopRecord& r) {
  std::string out = "t=" + std::to_string(r.time) + " " + to_string(r.key) + " " + r.thread + " {";
  for (const auto& l : r.locals) {
    out += " " + l.name + "=" + (l.known ? std::to_string(l.bits) : "x") + "'" + std::to_string(l.width);
  }
  return out + " }";
}

}  // namespace

std::vector<StopRecord> oracle_stops(const ExecutionTrace& trace, const SymbolTable& table) {
  std::set<std::tuple<std::string, std::string, uint32_t, uint32_t, uint32_t>> rows;
  for (const auto& b : table.breakpoints) {
    rows.emplace(table.instance(b.instance_id)->name, b.file, b.line, b.column, b.ordinal);
  }
  std::vector<StopRecord> out;
  for (const StmtExecution& e : trace.log) {
    if (!rows.count({e.instance, e.loc.file, e.loc.line, e.loc.column, e.ordinal})) continue;
    StopRecord r;
    r.time = e.cycle * CycleSim::kPeriod;
    r.key = SourceKey{e.loc.file, e.loc.line, e.loc.column, e.ordinal};
    r.thread = e.instance;
    for (const auto& nv : e.pre) r.locals.push_back(local(nv.name, nv.value));
    std::sort(r.locals.begin(), r.locals.end());
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<StopRecord> flatten(const StopEvent& stop) {
  std::vector<StopRecord> out;
  for (const FrameSnapshot& f : stop.frames) {
    if (!f.fired) continue;
    StopRecord r;
    r.time = stop.time;
    r.key = stop.key;
    r.thread = f.thread;
    for (const FrameValue& v : f.locals) {
      if (v.value) r.locals.push_back(local(v.name, *v.value));
    }
    std::sort(r.locals.begin(), r.locals.end());
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StopRecord> debugger_stops(SimHandle& sim, const SymbolTable& table) {
  DebuggerCore core(sim, table, DebuggerCore::locate(sim, table));
  for (const std::string& file : table.files()) {
    for (uint32_t line : table.breakpoint_lines(file)) core.insert_breakpoint(file, line);
  }
  std::vector<StopRecord> out;
  core.set_listener([&](const CoreEvent& e) {
    if (e.kind != CoreEvent::Kind::kStopped) return;
    for (auto& r : flatten(*e.stop)) out.push_back(std::move(r));
    core.post([](DebuggerCore& c) { c.resume(ResumeCommand::kContinue); });
  });
  sim.run();
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> diff_stops(const std::vector<StopRecord>& expected,
                                    const std::vector<StopRecord>& actual, size_t limit) {
  std::vector<std::string> out;
  std::vector<StopRecord> missing;
  std::vector<StopRecord> extra;
  std::set_difference(expected.begin(), expected.end(), actual.begin(), actual.end(),
                      std::back_inserter(missing));
  std::set_difference(actual.begin(), actual.end(), expected.begin(), expected.end(),
                      std::back_inserter(extra));
  for (const auto& r : missing) {
    if (out.size() >= limit) break;
    out.push_back("missing " + describe(r));
  }
  for (const auto& r : extra) {
    if (out.size() >= 2 * limit) break;
    out.push_back("unexpected " + describe(r));
  }
  return out;
}

}  // namespace hwdbg::testing
