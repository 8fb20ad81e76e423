#include "hwdbg/netlist.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace hwdbg {

NExpr NExpr::constant(uint64_t value, uint32_t width) {
  NExpr e;
  e.kind = Kind::kConst;
  e.width = width;
  e.value = value & width_mask(width);
  return e;
}

NExpr NExpr::net_ref(int net, uint32_t width) {
  NExpr e;
  e.kind = Kind::kNet;
  e.net = net;
  e.width = width;
  return e;
}

NExpr NExpr::unary(UnaryOp op, NExpr a) {
  NExpr e;
  e.kind = Kind::kUnary;
  e.unary_op = op;
  e.width = result_width(op, a.width);
  e.args.push_back(std::move(a));
  return e;
}

NExpr NExpr::binary(BinaryOp op, NExpr a, NExpr b) {
  NExpr e;
  e.kind = Kind::kBinary;
  e.binary_op = op;
  e.width = result_width(op, a.width, b.width);
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

NExpr NExpr::select(NExpr cond, NExpr a, NExpr b) {
  NExpr e;
  e.kind = Kind::kSelect;
  e.width = std::max(a.width, b.width);
  e.args.push_back(std::move(cond));
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

int Netlist::add_net(Net net) {
  const int id = static_cast<int>(nets.size());
  if (!index_.emplace(net.name, id).second) throw Error("duplicate net '" + net.name + "'");
  nets.push_back(std::move(net));
  return id;
}

int Netlist::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? -1 : it->second;
}

void Netlist::reindex() {
  index_.clear();
  for (size_t i = 0; i < nets.size(); ++i) index_.emplace(nets[i].name, static_cast<int>(i));
}

std::vector<int> Netlist::topo_order() const {
  // Iterative DFS; 0 = new, 1 = on stack, 2 = done.
  std::vector<uint8_t> state(nets.size(), 0);
  std::vector<int> order;
  for (size_t root = 0; root < nets.size(); ++root) {
    if (state[root] != 0 || !nets[root].driver) continue;
    std::vector<std::pair<int, std::vector<int>>> stack;
    auto deps = [&](int n) {
      std::vector<int> d;
      if (nets[n].driver) {
        for_each_net_ref(*nets[n].driver, [&](int m) {
          if (nets[m].driver) d.push_back(m);
        });
      }
      std::reverse(d.begin(), d.end());
      return d;
    };
    stack.emplace_back(static_cast<int>(root), deps(static_cast<int>(root)));
    state[root] = 1;
    while (!stack.empty()) {
      auto& [n, pending] = stack.back();
      if (pending.empty()) {
        state[n] = 2;
        order.push_back(n);
        stack.pop_back();
        continue;
      }
      const int m = pending.back();
      pending.pop_back();
      if (state[m] == 1) throw Error("combinational cycle through net '" + nets[m].name + "'");
      if (state[m] == 0) {
        state[m] = 1;
        stack.emplace_back(m, deps(m));
      }
    }
  }
  return order;
}

uint64_t eval_nexpr(const NExpr& e, const std::vector<uint64_t>& values) {
  switch (e.kind) {
    case NExpr::Kind::kConst:
      return e.value;
    case NExpr::Kind::kNet:
      return values[static_cast<size_t>(e.net)];
    case NExpr::Kind::kUnary:
      return apply(e.unary_op, eval_nexpr(e.args[0], values), e.width);
    case NExpr::Kind::kBinary:
      return apply(e.binary_op, eval_nexpr(e.args[0], values), eval_nexpr(e.args[1], values),
                   e.width);
    case NExpr::Kind::kSelect:
      return eval_nexpr(e.args[0], values) != 0 ? eval_nexpr(e.args[1], values)
                                                : eval_nexpr(e.args[2], values);
  }
  return 0;
}

namespace {

void render_into(const NExpr& e, const Netlist& nl, std::string& out, bool nested) {
  const bool atom = e.kind == NExpr::Kind::kConst || e.kind == NExpr::Kind::kNet ||
                    e.kind == NExpr::Kind::kUnary;
  if (nested && !atom) out += '(';
  switch (e.kind) {
    case NExpr::Kind::kConst:
      out += std::to_string(e.value);
      break;
    case NExpr::Kind::kNet:
      out += nl.net(e.net).name;
      break;
    case NExpr::Kind::kUnary:
      out += op_text(e.unary_op);
      render_into(e.args[0], nl, out, true);
      break;
    case NExpr::Kind::kBinary:
      render_into(e.args[0], nl, out, true);
      out += ' ';
      out += op_text(e.binary_op);
      out += ' ';
      render_into(e.args[1], nl, out, true);
      break;
    case NExpr::Kind::kSelect:
      render_into(e.args[0], nl, out, true);
      out += " ? ";
      render_into(e.args[1], nl, out, true);
      out += " : ";
      render_into(e.args[2], nl, out, true);
      break;
  }
  if (nested && !atom) out += ')';
}


}  // namespace

std::string render(const NExpr& e, const Netlist& netlist) {
  std::string out;
  render_into(e, netlist, out, false);
  return out;
}

std::string emit_verilog_like(const Netlist& nl) {
  std::ostringstream out;
  const std::string top = nl.instances.empty() ? std::string("top") : nl.instances[0].path;
  out << "// flat netlist: " << nl.nets.size() << " nets, " << nl.registers.size()
      << " registers\n";
  out << "module " << top << " (\n";
  std::vector<std::string> ports;
  for (int id : nl.clocks) ports.push_back("  input  " + nl.net(id).name);
  for (int id : nl.inputs) {
    ports.push_back("  input  [" + std::to_string(nl.net(id).width - 1) + ":0] " + nl.net(id).name);
  }
  for (int id : nl.outputs) {
    ports.push_back("  output [" + std::to_string(nl.net(id).width - 1) + ":0] " + nl.net(id).name);
  }
  for (size_t i = 0; i < ports.size(); ++i) {
    out << ports[i] << (i + 1 < ports.size() ? ",\n" : "\n");
  }
  out << ");\n";
  for (const auto& inst : nl.instances) {
    out << "  // instance " << inst.path << " : " << inst.module << "\n";
  }
  for (const auto& n : nl.nets) {
    if (n.kind == NetKind::kReg) {
      out << "  reg  [" << n.width - 1 << ":0] " << n.name << ";\n";
    } else if (n.kind == NetKind::kWire || n.kind == NetKind::kSsa) {
      out << "  wire [" << n.width - 1 << ":0] " << n.name << ";\n";
    }
  }
  for (const auto& n : nl.nets) {
    if (!n.driver) continue;
    out << "  assign " << n.name << " = " << render(*n.driver, nl) << ";\n";
  }
  for (const auto& r : nl.registers) {
    const Net& q = nl.net(r.net);
    out << "  always @(posedge " << nl.net(r.clock).name << ") ";
    if (r.rst >= 0 && r.reset) {
      out << "if (" << nl.net(r.rst).name << ") " << q.name << " <= " << *r.reset << "; else ";
    }
    out << q.name << " <= " << nl.net(r.next).name << ";\n";
  }
  out << "endmodule\n";
  return out.str();
}

}  // namespace hwdbg
