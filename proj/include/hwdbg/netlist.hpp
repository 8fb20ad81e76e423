#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hwdbg/value.hpp"

namespace hwdbg {

// Driver expression over nets. Every node carries its result width; a net
// reference wider than its net reads the zero-extended value.
struct NExpr {
  enum class Kind { kConst, kNet, kUnary, kBinary, kSelect };

  Kind kind = Kind::kConst;
  uint32_t width = 1;
  uint64_t value = 0;  // kConst
  int net = -1;        // kNet
  UnaryOp unary_op = UnaryOp::kNot;
  BinaryOp binary_op = BinaryOp::kAdd;
  std::vector<NExpr> args;

  static NExpr constant(uint64_t value, uint32_t width);
  static NExpr net_ref(int net, uint32_t width);
  static NExpr unary(UnaryOp op, NExpr a);
  static NExpr binary(BinaryOp op, NExpr a, NExpr b);
  static NExpr select(NExpr cond, NExpr a, NExpr b);

  bool is_const() const { return kind == Kind::kConst; }
};

enum class NetKind {
  kInput,  // top-level input, driven by the environment
  kClock,  // top-level clock
  kReg,    // register output; next value comes from Register::next
  kWire,   // committed variable or port connection
  kSsa,    // single-assignment temporary `<var>__<k>`
};

struct Net {
  std::string name;  // hierarchical, e.g. `top.sum__1`
  uint32_t width = 1;
  NetKind kind = NetKind::kWire;
  std::optional<NExpr> driver;
  int instance = 0;
  std::string source_name;  // element name for declared variables, empty for temporaries
};

struct Register {
  int net = -1;
  int clock = -1;
  int next = -1;  // net holding the next value; equals `net` when never assigned
  std::optional<uint64_t> reset;
  int rst = -1;   // synchronous reset net, -1 when there is no reset
};

struct NetInstance {
  std::string path;
  std::string module;
  int parent = -1;
};

class Netlist {
 public:
  std::vector<NetInstance> instances;
  std::vector<Net> nets;
  std::vector<Register> registers;
  std::vector<int> inputs;
  std::vector<int> outputs;
  std::vector<int> clocks;

  int add_net(Net net);
  // -1 when absent.
  int find(std::string_view name) const;
  const Net& net(int id) const { return nets[static_cast<size_t>(id)]; }

  // Nets with drivers, ordered so that every net follows the nets its driver
  // reads. Throws Error naming a net on a combinational cycle.
  std::vector<int> topo_order() const;

  // Rebuilds the name index after nets are removed or renamed.
  void reindex();

 private:
  std::unordered_map<std::string, int> index_;
};

// Calls fn(net_id) for every net referenced by the expression.
template <typename Fn>
void for_each_net_ref(const NExpr& e, Fn&& fn) {
  if (e.kind == NExpr::Kind::kNet) {
    fn(e.net);
    return;
  }
  for (const auto& a : e.args) for_each_net_ref(a, fn);
}

// Evaluates a driver expression given net values (two-valued semantics).
uint64_t eval_nexpr(const NExpr& e, const std::vector<uint64_t>& values);

// Renders an expression in the debugger expression grammar over hierarchical
// net names. The text parses back to an expression with identical widths.
std::string render(const NExpr& e, const Netlist& netlist);

// Deterministic flat RTL listing.
std::string emit_verilog_like(const Netlist& netlist);

}  // namespace hwdbg
