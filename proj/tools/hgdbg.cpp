// hgdbg: gdb-style command-line client for the debug server. Connects to a
// running server, or hosts one in-process over a trace or a simulated design.

#include <unistd.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hwdbg/bench.hpp"
#include "hwdbg/lexer.hpp"
#include "hwdbg/server.hpp"
#include "hwdbg/symtab.hpp"

namespace fs = std::filesystem;
using namespace hwdbg;

namespace {

constexpr double kEventTimeout = 120;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commands(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string part;
  while (std::getline(ss, part, ';')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::optional<uint64_t> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  size_t used = 0;
  try {
    const int base = s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0 ? 16 : 10;
    const uint64_t v = std::stoull(s, &used, base);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string value_text(const Json& v) {
  const std::string s = v.value("value", "");
  return s == "unavailable" ? "<optimized out>" : s;
}

std::string node_text(const Json& node) {
  if (!node.contains("members")) return value_text(node);
  const bool array = node.value("array", false);
  std::string out = array ? "[" : "{";
  bool first = true;
  for (const Json& m : node["members"]) {
    if (!first) out += ", ";
    first = false;
    if (!array) out += m["name"].get<std::string>() + " = ";
    out += node_text(m);
  }
  return out + (array ? "]" : "}");
}

// Request/response and event printing for one connection.
class Console {
 public:
  Console(Client& client, std::ostream& out) : client_(client), out_(out) {}

  // Returns false on `q`.
  bool execute(const std::string& line) {
    std::istringstream in(line);
    std::string cmd;
    in >> cmd;
    std::string rest;
    std::getline(in, rest);
    rest = trim(rest);
    try {
      return dispatch(cmd, rest);
    } catch (const Error& e) {
      out_ << "error: " << e.what() << "\n";
      return true;
    }
  }

 private:
  bool dispatch(const std::string& cmd, const std::string& rest) {
    if (cmd == "q" || cmd == "quit") return false;
    if (cmd == "b" || cmd == "break") {
      set_breakpoint(rest);
    } else if (cmd == "d" || cmd == "delete") {
      remove_breakpoint(rest);
    } else if (cmd == "c" || cmd == "continue") {
      resume("continue");
    } else if (cmd == "n" || cmd == "next") {
      resume("step-over");
    } else if (cmd == "rc") {
      resume("reverse-continue");
    } else if (cmd == "rn") {
      resume("reverse-step");
    } else if (cmd == "p" || cmd == "print") {
      if (rest.empty()) throw Error("usage: p <expr>");
      if (auto r = call("evaluate", Json{{"expr", rest}})) out_ << rest << " = " << value_text(*r) << "\n";
    } else if (cmd == "set") {
      set_value(rest);
    } else if (cmd == "time") {
      const auto t = parse_number(rest);
      if (!t) throw Error("usage: time <t>");
      if (auto r = call("set-time", Json{{"time", *t}})) out_ << "time " << (*r)["time"] << "\n";
    } else if (cmd == "info" || cmd == "i") {
      info(rest);
    } else if (cmd == "help" || cmd == "h") {
      out_ << "b <file>:<line>[:<col>] [if <expr>] | d <id>|<file>:<line> | c | n | rc | rn | "
              "p <expr> | set <name> <value> | time <t> | "
              "info threads|breakpoints|time|frame|status|capabilities|files | q\n";
    } else {
      throw Error("unknown command '" + cmd + "'; try help");
    }
    return true;
  }

  // Payload of a successful response; prints the error otherwise.
  std::optional<Json> call(const std::string& command, Json payload) {
    const Json r = client_.request(command, std::move(payload), kEventTimeout);
    if (r.value("status", "") == "success") return r["payload"];
    const std::string reason = r.value("reason", "");
    out_ << "error" << (reason == "capability" ? " (capability)" : "") << ": "
         << r.value("message", "request failed") << "\n";
    return std::nullopt;
  }

  static std::pair<std::string, std::vector<uint64_t>> split_location(const std::string& loc) {
    std::vector<uint64_t> nums;
    std::string file = loc;
    for (int i = 0; i < 2; ++i) {
      const auto colon = file.rfind(':');
      if (colon == std::string::npos) break;
      auto n = parse_number(file.substr(colon + 1));
      if (!n) break;
      nums.insert(nums.begin(), *n);
      file = file.substr(0, colon);
    }
    if (nums.empty() || file.empty()) throw Error("expected <file>:<line>[:<column>], got '" + loc + "'");
    return {file, nums};
  }

  void set_breakpoint(const std::string& rest) {
    std::string loc = rest;
    std::string condition;
    const auto sp = rest.find_first_of(" \t");
    if (sp != std::string::npos) {
      loc = rest.substr(0, sp);
      const std::string tail = trim(rest.substr(sp));
      if (tail.rfind("if", 0) != 0 || (tail.size() > 2 && !std::isspace(static_cast<unsigned char>(tail[2])))) {
        throw Error("usage: b <file>:<line>[:<column>] [if <expr>]");
      }
      condition = trim(tail.substr(2));
      if (condition.empty()) throw Error("missing condition after 'if'");
    }
    const auto [file, nums] = split_location(loc);
    Json payload{{"file", file}, {"line", nums[0]}};
    if (nums.size() > 1) payload["column"] = nums[1];
    if (!condition.empty()) payload["condition"] = condition;
    auto r = call("set-breakpoint", payload);
    if (!r) return;
    const std::set<int64_t> ids((*r)["ids"].begin(), (*r)["ids"].end());
    auto list = call("list-breakpoints", Json::object());
    if (!list) return;
    for (const Json& b : (*list)["breakpoints"]) {
      if (ids.count(b["id"].get<int64_t>())) out_ << "breakpoint " << describe(b) << "\n";
    }
  }

  static std::string describe(const Json& b) {
    std::ostringstream s;
    s << b["id"].get<int64_t>() << " at " << b["file"].get<std::string>() << ":" << b["line"] << ":"
      << b["column"];
    if (b["ordinal"].get<int>() != 0) s << " #" << b["ordinal"];
    s << " in " << b["instance"].get<std::string>();
    if (!b["condition"].get<std::string>().empty()) s << " if " << b["condition"].get<std::string>();
    return s.str();
  }

  void remove_breakpoint(const std::string& rest) {
    std::optional<Json> r;
    if (auto id = parse_number(rest)) {
      r = call("remove-breakpoint", Json{{"id", *id}});
    } else {
      const auto [file, nums] = split_location(rest);
      r = call("remove-breakpoint", Json{{"file", file}, {"line", nums[0]}});
    }
    if (r) out_ << "deleted " << (*r)["removed"] << "\n";
  }

  void set_value(const std::string& rest) {
    const auto sp = rest.find_last_of(" \t");
    if (sp == std::string::npos) throw Error("usage: set <name> <value>");
    const std::string name = trim(rest.substr(0, sp));
    const auto v = parse_number(trim(rest.substr(sp)));
    if (name.empty() || !v) throw Error("usage: set <name> <value>");
    if (auto r = call("set-value", Json{{"name", name}, {"value", *v}})) {
      out_ << name << " = " << value_text(*r) << "\n";
    }
  }

  void resume(const std::string& command) {
    if (!call(command, Json::object())) return;
    for (;;) {
      auto e = client_.next_event(kEventTimeout);
      if (!e) throw Error("no event from the server");
      const std::string name = (*e)["command"];
      const Json& p = (*e)["payload"];
      if (name == "resumed") continue;
      if (name == "stopped") {
        print_stop(p);
      } else if (name == "ended") {
        out_ << "simulation ended at time " << p["time"] << "\n";
      } else if (name == "notice") {
        out_ << "notice: " << p["message"].get<std::string>() << " (time " << p["time"] << ")\n";
      }
      return;
    }
  }

  void print_stop(const Json& s) {
    out_ << "stopped" << (s["reverse"].get<bool>() ? " (reverse)" : "") << " at "
         << s["file"].get<std::string>() << ":" << s["line"] << ":" << s["column"];
    if (s["ordinal"].get<int>() != 0) out_ << " #" << s["ordinal"];
    out_ << ", time " << s["time"] << "\n";
    for (const Json& f : s["frames"]) print_frame(f, false);
  }

  void print_frame(const Json& f, bool with_instance) {
    out_ << "  thread " << f["thread"].get<std::string>();
    if (f["fired"].get<bool>()) {
      out_ << " (breakpoint " << f["breakpoint"] << ")";
    } else {
      out_ << " (step)";
    }
    out_ << "\n";
    for (const Json& n : f["locals"]) out_ << "    " << n["name"].get<std::string>() << " = " << node_text(n) << "\n";
    if (!with_instance) return;
    for (const Json& n : f["instance"]) {
      out_ << "    [" << n["name"].get<std::string>() << "] = " << node_text(n) << "\n";
    }
  }

  void info(const std::string& what) {
    if (what == "frame") {
      if (auto r = call("frames", Json::object())) {
        for (const Json& f : (*r)["frames"]) print_frame(f, true);
      }
      return;
    }
    if (what == "b") return info("breakpoints");
    auto r = call("info", Json{{"what", what}});
    if (!r) return;
    if (what == "threads") {
      const Json& threads = (*r)["threads"];
      if (threads.empty()) out_ << "no threads: not stopped\n";
      int i = 1;
      for (const Json& t : threads) {
        out_ << (i == 1 ? "* " : "  ") << i << " " << t["thread"].get<std::string>()
             << (t["fired"].get<bool>() ? "" : " (step)") << "\n";
        ++i;
      }
    } else if (what == "breakpoints") {
      const Json& list = (*r)["breakpoints"];
      if (list.empty()) out_ << "no breakpoints\n";
      for (const Json& b : list) out_ << describe(b) << "\n";
    } else if (what == "time") {
      out_ << "time " << (*r)["time"] << "\n";
    } else if (what == "files") {
      for (const Json& f : (*r)["files"]) out_ << f.get<std::string>() << "\n";
    } else {
      out_ << r->dump() << "\n";
    }
  }

  Client& client_;
  std::ostream& out_;
};

// Server plus backend living in this process.
struct SelfHost {
  std::unique_ptr<Compiled> compiled;  // kept alive for a CycleSim netlist
  std::unique_ptr<Session> session;
  std::unique_ptr<Server> server;

  ~SelfHost() {
    if (server) server->stop();
    if (session) session->stop();
  }
};

std::map<std::string, std::string> load_sources(const SymbolTable& table,
                                                const std::vector<std::string>& dirs) {
  std::map<std::string, std::string> out;
  for (const std::string& f : table.files()) {
    std::vector<fs::path> candidates{f};
    for (const auto& d : dirs) {
      candidates.push_back(fs::path(d) / f);
      candidates.push_back(fs::path(d) / fs::path(f).filename());
    }
    for (const auto& c : candidates) {
      std::error_code ec;
      if (fs::is_regular_file(c, ec)) {
        out[f] = read_file(c.string());
        break;
      }
    }
  }
  return out;
}

int run_bench(uint64_t edges, int runs, size_t conditional, const std::string& vcd,
              const std::string& symtab, std::optional<double> gate) {
  TraceStore trace;
  SymbolTable table;
  if (!vcd.empty()) {
    if (symtab.empty()) throw Error("--vcd needs --symtab");
    trace = parse_vcd(vcd);
    table = load(symtab);
  } else {
    Workload w = synthetic_workload(edges);
    trace = std::move(w.trace);
    table = std::move(w.compiled.symbols);
  }
  table.build_index();
  BenchOptions options;
  options.runs = runs;
  options.conditional = conditional;
  const BenchReport r = bench_replay(std::make_shared<const TraceStore>(std::move(trace)), table, options);
  std::cout << format_report(r);
  if (gate && r.attached_ratio() > 1.0 + *gate) {
    std::cout << "FAIL: overhead above " << *gate * 100 << "%\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-level debugger client for mini-HDL designs"};
  std::string host = "127.0.0.1";
  std::optional<uint16_t> port;
  std::string vcd, symtab, run_design, stimulus, script, commands;
  std::vector<std::string> clocks, source_dirs;
  std::optional<uint64_t> cycles;
  bool optimized = false;
  bool serve = false;

  app.add_option("--host", host, "server host");
  app.add_option("--port", port, "server port (default: HGDB_PORT or 8888)");
  auto* vcd_opt = app.add_option("--vcd", vcd, "self-host: replay this trace");
  app.add_option("--symtab", symtab, "self-host: symbol table for --vcd");
  app.add_option("--clock", clocks, "clock signal in the trace; repeatable");
  app.add_option("--source-dir", source_dirs, "where to look for design sources; repeatable");
  auto* run_opt = app.add_option("--run", run_design, "self-host: simulate this design")->excludes(vcd_opt);
  app.add_option("--stimulus", stimulus, "stimulus file for --run");
  app.add_option("--cycles", cycles, "cycles to simulate for --run");
  app.add_flag("--optimized", optimized, "compile --run designs with optimizations");
  app.add_flag("--serve", serve, "self-host only: serve clients until stdin closes");
  app.add_option("--script", script, "run commands from a file and print a transcript");
  app.add_option("-e,--execute", commands, "run these ;-separated commands");

  auto* bench = app.add_subcommand("bench", "measure replay overhead of the attached runtime");
  uint64_t bench_edges = 100000;
  int bench_runs = 5;
  size_t bench_conditional = 8;
  std::string bench_vcd, bench_symtab;
  std::optional<double> bench_gate;
  bench->add_option("--edges", bench_edges, "rising edges of the synthetic workload");
  bench->add_option("--runs", bench_runs, "runs per configuration");
  bench->add_option("--conditional", bench_conditional, "breakpoint locations for (c)");
  bench->add_option("--vcd", bench_vcd, "use this trace instead of the synthetic workload");
  bench->add_option("--symtab", bench_symtab, "symbol table for --vcd");
  bench->add_option("--gate", bench_gate, "exit 1 when (b) exceeds bare replay by this fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (bench->parsed()) {
      return run_bench(bench_edges, bench_runs, bench_conditional, bench_vcd, bench_symtab, bench_gate);
    }

    SelfHost self;
    if (!vcd.empty() || run_opt->count() > 0) {
      std::shared_ptr<SimHandle> sim;
      SymbolTable table;
      std::map<std::string, std::string> sources;
      if (!vcd.empty()) {
        if (symtab.empty()) throw Error("--vcd needs --symtab");
        sim = std::make_shared<VcdReplay>(parse_vcd(vcd), clocks);
        table = load(symtab);
        sources = load_sources(table, source_dirs);
      } else {
        if (stimulus.empty()) throw Error("--run needs --stimulus");
        const std::string text = read_file(run_design);
        const std::string file = normalize_path(run_design);
        self.compiled = std::make_unique<Compiled>(
            compile(text, file, optimized ? OptLevel::kOptimized : OptLevel::kDebug));
        auto stim = parse_stimulus(read_file(stimulus), self.compiled->program, cycles);
        sim = std::make_shared<CycleSim>(self.compiled->lowered.netlist, std::move(stim), cycles);
        table = self.compiled->symbols;
        sources[file] = text;
      }
      self.session = std::make_unique<Session>(sim, std::move(table), std::move(sources));
      for (const auto& w : self.session->warnings()) std::cerr << "warning: " << w << "\n";
      self.session->start();
      const uint16_t listen = port ? *port : (serve ? default_port() : 0);
      self.server = std::make_unique<Server>(*self.session, "127.0.0.1", listen);
      self.server->start();
      port = self.server->port();
      host = "127.0.0.1";
      if (serve) {
        std::cerr << "listening on 127.0.0.1:" << *port << "\n";
        std::string line;
        while (std::getline(std::cin, line)) {
        }
        return 0;
      }
    } else if (serve) {
      throw Error("--serve needs --vcd or --run");
    }

    Client client(host, port ? *port : default_port());
    Console console(client, std::cout);

    std::vector<std::string> lines;
    if (!commands.empty()) lines.push_back(commands);
    if (!script.empty()) {
      std::istringstream in(read_file(script));
      for (std::string l; std::getline(in, l);) lines.push_back(l);
    }
    const bool batch = !lines.empty();
    const bool tty = !batch && isatty(STDIN_FILENO);

    auto run_line = [&](const std::string& line, bool echo) {
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') return true;
      for (const auto& cmd : split_commands(t)) {
        if (echo) std::cout << "(hgdb) " << cmd << "\n";
        if (!console.execute(cmd)) return false;
      }
      return true;
    };

    if (batch) {
      for (const auto& l : lines) {
        if (!run_line(l, true)) break;
      }
    } else {
      for (;;) {
        if (tty) std::cout << "(hgdb) " << std::flush;
        std::string line;
        if (!std::getline(std::cin, line)) break;
        if (!run_line(line, !tty)) break;
      }
    }
    std::cout << std::flush;
    return 0;
  } catch (const SyntaxError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "hgdbg: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "hgdbg: internal error: " << e.what() << "\n";
    return 2;
  }
}
