#pragma once

#include <deque>
#include <string>
#include <vector>

#include "hwdbg/runtime.hpp"

namespace hwdbg::testing {

// Answers every pause with the next scripted command, then `fallback`.
struct Script {
  DebuggerCore& core;
  std::deque<ResumeCommand> commands;
  ResumeCommand fallback = ResumeCommand::kContinue;
  std::vector<StopEvent> stops;
  std::vector<std::string> notices;

  explicit Script(DebuggerCore& c, std::deque<ResumeCommand> cmds = {})
      : core(c), commands(std::move(cmds)) {
    core.set_listener([this](const CoreEvent& e) {
      if (e.kind == CoreEvent::Kind::kStopped) {
        stops.push_back(*e.stop);
      } else if (e.kind == CoreEvent::Kind::kNotice) {
        notices.push_back(e.text);
      } else {
        return;
      }
      ResumeCommand next = fallback;
      if (!commands.empty()) {
        next = commands.front();
        commands.pop_front();
      }
      core.post([next](DebuggerCore& d) { d.resume(next); });
    });
  }
};

}  // namespace hwdbg::testing
