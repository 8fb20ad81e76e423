#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hwdbg/expr.hpp"
#include "hwdbg/lexer.hpp"
#include "hwdbg/value.hpp"

namespace hwdbg {

struct SourceLoc {
  std::string file;
  uint32_t line = 1;
  uint32_t column = 1;

  bool operator==(const SourceLoc&) const = default;
};

std::string normalize_path(std::string_view path);

enum class VarKind { kClock, kInput, kOutput, kWire, kReg };

std::string_view to_string(VarKind kind);

struct VarDecl {
  std::string name;  // may contain `.` for bundle members, e.g. `io.a`
  VarKind kind = VarKind::kWire;
  uint32_t width = 1;
  uint32_t array_size = 0;  // 0 for scalars
  std::string clock;        // registers only
  std::optional<uint64_t> reset;
  SourceLoc loc;

  bool is_array() const { return array_size > 0; }
  uint32_t element_count() const { return array_size == 0 ? 1 : array_size; }
  // Source-level element name: `data[1]` or `sum`.
  std::string element(uint32_t index) const;
  // Flattened RTL leaf name: `data_1`, `io_a`, `sum`.
  std::string rtl_element(uint32_t index) const;
};

struct Stmt {
  enum class Kind { kAssign, kIf, kFor, kBlock };

  Kind kind = Kind::kBlock;
  SourceLoc loc;
  // kAssign
  Expr target;
  Expr value;
  // kIf
  Expr cond;
  std::vector<Stmt> then_body;
  std::vector<Stmt> else_body;
  // kFor: iterates loop_var over [lo, hi)
  std::string loop_var;
  uint64_t lo = 0;
  uint64_t hi = 0;
  // kFor and kBlock
  std::vector<Stmt> body;
};

struct Block {
  enum class Kind { kComb, kSeq };
  Kind kind = Kind::kComb;
  std::string clock;  // seq only
  std::vector<Stmt> body;
  SourceLoc loc;
};

struct PortBinding {
  Expr port;         // child port element, optionally indexed by a constant
  bool is_output = false;
  Expr expr;         // input: parent expression; output: parent element
  SourceLoc loc;
};

struct InstanceDecl {
  std::string name;
  std::string module;
  std::vector<PortBinding> bindings;
  SourceLoc loc;
};

struct ModuleDef {
  std::string name;
  std::vector<VarDecl> vars;
  std::vector<Block> blocks;
  std::vector<InstanceDecl> instances;
  SourceLoc loc;

  const VarDecl* find_var(std::string_view name) const;
  const InstanceDecl* find_instance(std::string_view name) const;
};

struct SourceProgram {
  std::vector<ModuleDef> modules;
  std::string top;
  std::string file;

  const ModuleDef* find_module(std::string_view name) const;
  const ModuleDef& top_module() const;
};

// Parses and validates a whole design. Throws SyntaxError with file:line:col
// for syntax errors, duplicate or unknown names, non-constant loop bounds,
// latches, use-before-definition and combinational cycles.
SourceProgram parse(std::string_view source_text, std::string_view file);

// Prints the program in canonical form; the result parses back to a program
// with the same structure.
std::string pretty_print(const SourceProgram& program);

// Structural equality ignoring source locations.
bool same_structure(const SourceProgram& a, const SourceProgram& b);

// Calls `fn(stmt)` for every statement, depth first.
void for_each_stmt(const SourceProgram& program, const std::function<void(const Stmt&)>& fn);

// ---------------------------------------------------------------------------
// Helpers shared by the interpreter and the lowering passes.

// Loop variables in scope, outermost first.
using LoopEnv = std::vector<std::pair<std::string, uint64_t>>;

struct ElementRef {
  const VarDecl* decl = nullptr;
  uint32_t index = 0;

  std::string source_name() const { return decl->element(index); }
  std::string rtl_name() const { return decl->rtl_element(index); }
};

std::optional<uint64_t> loop_value(const LoopEnv& env, std::string_view name);

// Evaluates an index or bound expression built from literals and loop
// variables. Throws SyntaxError otherwise.
uint64_t eval_constant(const Expr& expr, const LoopEnv& env, const std::string& file);

// Resolves an identifier (optionally indexed) to a declared element.
ElementRef resolve_element(const ModuleDef& module, const Expr& ident, const LoopEnv& env,
                           const std::string& file);

// Source element names referenced (read or written) anywhere in the block,
// in declaration order. Loop variables are not included.
std::vector<std::string> block_scope_elements(const ModuleDef& module, const Block& block,
                                              const std::string& file);

// Value of a loop variable as seen by expressions: an unsized literal.
Value loop_var_value(uint64_t v);

// ---------------------------------------------------------------------------
// Elaboration: the instance tree plus the evaluation order of combinational
// logic across instances.

struct ElabInstance {
  std::string path;  // `top`, `top.u0`
  const ModuleDef* def = nullptr;
  int parent = -1;
  const InstanceDecl* decl = nullptr;  // null for the root
  std::vector<int> children;
};

struct CombNode {
  enum class Kind { kBlock, kInputBinding, kOutputBinding };
  Kind kind = Kind::kBlock;
  int instance = 0;  // block owner, or the child instance of the binding
  size_t index = 0;  // block index or binding index
};

struct ElaboratedDesign {
  std::vector<ElabInstance> instances;  // pre-order, root first
  std::vector<CombNode> comb_order;     // topological
};

ElaboratedDesign elaborate(const SourceProgram& program);

// ---------------------------------------------------------------------------
// Reference interpreter.

// Per cycle assignment of top-level inputs, keyed by source element name
// (`data[0]`, `rst`). Clocks are driven by the simulator and never appear.
using InputMap = std::map<std::string, Value>;

struct NamedValue {
  std::string name;
  Value value;

  bool operator==(const NamedValue&) const = default;
};

struct StmtExecution {
  uint64_t cycle = 0;
  std::string instance;  // instance path
  SourceLoc loc;
  uint32_t ordinal = 0;  // unrolled-copy index of the statement
  std::vector<NamedValue> pre;
  std::vector<NamedValue> post;
};

struct CycleState {
  // Every element of every instance as seen at the rising edge, keyed by
  // flattened hierarchical name (`top.sum`, `top.u.io_a`).
  std::map<std::string, Value> values;
};

struct ExecutionTrace {
  std::vector<CycleState> cycles;
  std::vector<StmtExecution> log;
};

// Runs the design for stimulus.size() cycles. Throws Error for unknown input
// names, missing inputs, and values wider than the declared input.
ExecutionTrace interpret(const SourceProgram& program, const std::vector<InputMap>& stimulus);

// Reads a stimulus file: lines `cycle,name=value,...`; blank lines and `#`
// comments ignored; unassigned inputs hold their previous value (0 initially).
std::vector<InputMap> parse_stimulus(std::string_view text, const SourceProgram& program,
                                     std::optional<uint64_t> cycles = std::nullopt);

// Input elements the stimulus must assign (all top-level inputs, not clocks).
std::vector<std::pair<std::string, uint32_t>> stimulus_inputs(const SourceProgram& program);

}  // namespace hwdbg
