#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hwdbg/bench.hpp"
#include "hwdbg/lexer.hpp"
#include "hwdbg/lowering.hpp"
#include "hwdbg/server.hpp"
#include "hwdbg/symtab.hpp"

namespace py = pybind11;
using namespace hwdbg;

namespace {

// A server and its backend in this process. Keeps the compiled design alive
// for a cycle-simulator backend.
class Host {
 public:
  static std::unique_ptr<Host> replay(const std::string& vcd, const std::string& symtab,
                                      std::vector<std::string> clocks,
                                      std::map<std::string, std::string> sources, uint16_t port) {
    auto h = std::make_unique<Host>();
    auto sim = std::make_shared<VcdReplay>(parse_vcd(vcd), std::move(clocks));
    h->start(sim, load(symtab), std::move(sources), port);
    return h;
  }

  static std::unique_ptr<Host> simulate(const Compiled& c, const std::string& stimulus,
                                        std::optional<uint64_t> cycles, const std::string& source,
                                        uint16_t port) {
    auto h = std::make_unique<Host>();
    h->compiled_ = std::make_unique<Compiled>(c);
    auto stim = parse_stimulus(stimulus, h->compiled_->program, cycles);
    auto sim = std::make_shared<CycleSim>(h->compiled_->lowered.netlist, std::move(stim), cycles);
    std::map<std::string, std::string> sources;
    if (!source.empty()) sources[c.program.file] = source;
    h->start(sim, h->compiled_->symbols, std::move(sources), port);
    return h;
  }

  ~Host() { close(); }

  uint16_t port() const { return port_; }

  void close() {
    if (server_) server_->stop();
    if (session_) session_->stop();
    server_.reset();
    session_.reset();
  }

 private:
  void start(std::shared_ptr<SimHandle> sim, SymbolTable table, std::map<std::string, std::string> sources,
             uint16_t port) {
    session_ = std::make_unique<Session>(std::move(sim), std::move(table), std::move(sources));
    session_->start();
    server_ = std::make_unique<Server>(*session_, "127.0.0.1", port);
    server_->start();
    port_ = server_->port();
  }

  std::unique_ptr<Compiled> compiled_;
  std::unique_ptr<Session> session_;
  std::unique_ptr<Server> server_;
  uint16_t port_ = 0;
};

std::string simulate_vcd(const Compiled& c, const std::string& stimulus, std::optional<uint64_t> cycles) {
  CycleSim sim(c.lowered.netlist, parse_stimulus(stimulus, c.program, cycles), cycles);
  sim.enable_trace();
  sim.run();
  return write_vcd(sim.trace());
}

}  // namespace

PYBIND11_MODULE(_hwdbg, m) {
  m.doc() = "Compiler, simulators and debug server for mini-HDL designs";

  auto base = py::register_exception<Error>(m, "HwdbgError");
  py::register_exception<SyntaxError>(m, "HdlSyntaxError", base.ptr());
  py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());

  py::class_<Compiled>(m, "Compiled")
      .def_property_readonly("top", [](const Compiled& c) { return c.program.top; })
      .def_property_readonly("file", [](const Compiled& c) { return c.program.file; })
      .def("netlist", [](const Compiled& c) { return emit_verilog_like(c.lowered.netlist); })
      .def("symtab_json", [](const Compiled& c) { return to_json(c.symbols); })
      .def("store_symtab", [](const Compiled& c, const std::string& path) { store(c.symbols, path); },
           py::arg("path"))
      .def("breakpoint_lines",
           [](const Compiled& c, const std::string& file) {
             SymbolTable t = c.symbols;
             t.build_index();
             return t.breakpoint_lines(file.empty() ? c.program.file : file);
           },
           py::arg("file") = "")
      .def_property_readonly("removed_nets", [](const Compiled& c) { return c.optimize_report.removed_nets; })
      .def("simulate_vcd", &simulate_vcd, py::arg("stimulus"), py::arg("cycles") = py::none(),
           py::call_guard<py::gil_scoped_release>(), "VCD text of a cycle-simulator run");

  m.def(
      "compile",
      [](const std::string& source, const std::string& file, bool optimized) {
        return compile(source, file, optimized ? OptLevel::kOptimized : OptLevel::kDebug);
      },
      py::arg("source"), py::arg("file") = "design.mh", py::arg("optimized") = false);

  m.def("symtab_json", [](const std::string& path) { return to_json(load(path)); }, py::arg("path"),
        "JSON export of a stored symbol table");

  py::class_<Host>(m, "Host")
      .def_static("replay", &Host::replay, py::arg("vcd"), py::arg("symtab"),
                  py::arg("clocks") = std::vector<std::string>{},
                  py::arg("sources") = std::map<std::string, std::string>{}, py::arg("port") = 0)
      .def_static("simulate", &Host::simulate, py::arg("compiled"), py::arg("stimulus"),
                  py::arg("cycles") = py::none(), py::arg("source") = "", py::arg("port") = 0)
      .def_property_readonly("port", &Host::port)
      .def("close", &Host::close, py::call_guard<py::gil_scoped_release>());

  // Messages cross the boundary as JSON text; the Python wrapper decodes them.
  py::class_<Client>(m, "RawClient")
      .def(py::init<const std::string&, uint16_t>(), py::arg("host"), py::arg("port"))
      .def(
          "request",
          [](Client& c, const std::string& command, const std::string& payload, double timeout) {
            return c.request(command, Json::parse(payload), timeout).dump();
          },
          py::arg("command"), py::arg("payload") = "{}", py::arg("timeout") = 30.0,
          py::call_guard<py::gil_scoped_release>())
      .def(
          "next_event",
          [](Client& c, double timeout) -> std::optional<std::string> {
            auto e = c.next_event(timeout);
            if (!e) return std::nullopt;
            return e->dump();
          },
          py::arg("timeout") = 30.0, py::call_guard<py::gil_scoped_release>());

  m.def(
      "bench",
      [](uint64_t edges, int runs, size_t conditional) {
        BenchReport r;
        {
          py::gil_scoped_release release;
          Workload w = synthetic_workload(edges);
          w.compiled.symbols.build_index();
          BenchOptions o;
          o.runs = runs;
          o.conditional = conditional;
          r = bench_replay(std::make_shared<const TraceStore>(std::move(w.trace)), w.compiled.symbols, o);
        }
        py::dict d;
        d["edges"] = r.edges;
        d["bare"] = r.bare;
        d["attached"] = r.attached;
        d["conditional"] = r.conditional;
        d["conditional_breakpoints"] = r.conditional_breakpoints;
        d["stops"] = r.stops;
        d["attached_ratio"] = r.attached_ratio();
        d["conditional_ratio"] = r.conditional_ratio();
        return d;
      },
      py::arg("edges") = 100000, py::arg("runs") = 5, py::arg("conditional") = 8,
      "Replay overhead measurement on the synthetic workload");

  m.attr("DEFAULT_PORT") = kDefaultPort;
}
