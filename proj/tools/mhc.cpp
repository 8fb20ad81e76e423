// mhc: compiles a mini-HDL design to a netlist, a symbol table and
// optionally a VCD trace driven by a stimulus file.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hwdbg/lexer.hpp"
#include "hwdbg/lowering.hpp"
#include "hwdbg/sim.hpp"
#include "hwdbg/symtab.hpp"

namespace fs = std::filesystem;
using namespace hwdbg;

namespace {

constexpr int kUserError = 1;
constexpr int kInternalError = 2;

struct UserError : Error {
  using Error::Error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw UserError("cannot write '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compile a mini-HDL design into a netlist and a debug symbol table"};
  std::string input;
  std::string out_dir = ".";
  bool optimized = false;
  std::vector<std::string> emit;
  std::string stimulus_path;
  std::optional<uint64_t> cycles;

  app.add_option("input", input, "design file (.mh)")->required();
  app.add_option("-o,--output", out_dir, "output directory");
  auto* debug_flag = app.add_flag("--debug", "keep every source variable (default)");
  app.add_flag("--optimized", optimized, "constant-fold and remove dead nets")->excludes(debug_flag);
  app.add_option("--emit", emit, "netlist, symtab, json or vcd; repeatable (default: netlist, symtab)")
      ->check(CLI::IsMember({"netlist", "symtab", "json", "vcd"}));
  app.add_option("--stimulus", stimulus_path, "stimulus file for --emit vcd");
  app.add_option("--cycles", cycles, "cycles to simulate for --emit vcd (default: stimulus length)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUserError;
  }
  if (emit.empty()) emit = {"netlist", "symtab"};
  auto wants = [&](const char* what) { return std::find(emit.begin(), emit.end(), what) != emit.end(); };

  try {
    if (wants("vcd") && stimulus_path.empty()) throw UserError("--emit vcd needs --stimulus <file>");
    const std::string text = read_file(input);
    const std::string file = normalize_path(input);
    const Compiled c = compile(text, file, optimized ? OptLevel::kOptimized : OptLevel::kDebug);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw UserError("cannot create '" + out_dir + "': " + ec.message());
    const std::string stem = fs::path(input).stem().string();
    const fs::path base = fs::path(out_dir) / stem;

    if (wants("netlist")) {
      write_file(base.string() + ".net", emit_verilog_like(c.lowered.netlist));
      std::cout << "netlist  " << base.string() << ".net\n";
    }
    if (wants("symtab")) {
      store(c.symbols, base.string() + ".hgdb");
      std::cout << "symtab   " << base.string() << ".hgdb (" << c.symbols.breakpoints.size()
                << " breakpoints, " << c.symbols.variables.size() << " variables)\n";
    }
    if (wants("json")) {
      write_file(base.string() + ".json", to_json(c.symbols));
      std::cout << "json     " << base.string() << ".json\n";
    }
    if (wants("vcd")) {
      const auto stim = parse_stimulus(read_file(stimulus_path), c.program, cycles);
      CycleSim sim(c.lowered.netlist, stim, cycles);
      sim.enable_trace();
      const uint64_t edges = sim.run();
      dump_vcd(sim, base.string() + ".vcd");
      std::cout << "vcd      " << base.string() << ".vcd (" << edges << " cycles)\n";
    }
    if (optimized) {
      std::cout << "optimized: " << c.optimize_report.removed_nets << " nets removed, "
                << c.optimize_report.dropped_annotations << " breakpoints dropped\n";
    }
    return 0;
  } catch (const SyntaxError& e) {
    std::cerr << e.what() << "\n";
    return kUserError;
  } catch (const Error& e) {
    // Library errors come from user input: bad stimulus, unreadable files.
    std::cerr << "mhc: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception& e) {
    std::cerr << "mhc: internal error: " << e.what() << "\n";
    return kInternalError;
  }
}
