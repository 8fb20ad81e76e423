#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "hwdbg/frontend.hpp"
#include "hwdbg/netlist.hpp"
#include "hwdbg/symtab.hpp"

namespace hwdbg {

// Source variable -> net holding its value just before a statement runs.
// Loop variables map to their decimal value with `constant` set.
struct VarMapping {
  std::string source_name;
  std::string rtl_name;
  bool constant = false;
};

// One statement occurrence (statement x unrolled iteration) of one instance.
// Annotations refer to nets by name so they survive netlist rewrites.
struct Annotation {
  std::string instance;  // instance path
  SourceLoc loc;
  uint32_t ordinal = 0;
  std::string target;  // net defined by the statement
  std::string enable;  // AND of the active conditions, `1` when empty
  std::vector<std::string> enable_nets;
  std::vector<VarMapping> scope;
};

struct Lowered {
  Netlist netlist;
  std::vector<Annotation> annotations;
};

enum class OptLevel { kDebug, kOptimized };

struct OptimizeReport {
  size_t folded_nets = 0;     // nets whose driver became a constant
  size_t removed_nets = 0;
  size_t dropped_annotations = 0;
};

struct CollectReport {
  size_t dangling = 0;          // annotation target no longer in the netlist
  size_t unmapped = 0;          // every mapped net was removed
};

Lowered unroll_and_ssa(const SourceProgram& program);

// kDebug returns the input unchanged.
Lowered optimize(Lowered lowered, OptLevel level, OptimizeReport* report = nullptr);

SymbolTable collect_symbols(const Netlist& netlist, const std::vector<Annotation>& annotations,
                            CollectReport* report = nullptr);

struct Compiled {
  SourceProgram program;
  Lowered lowered;
  SymbolTable symbols;
  OptimizeReport optimize_report;
  CollectReport collect_report;
};

// parse -> unroll_and_ssa -> optimize -> collect_symbols.
Compiled compile(std::string_view source_text, std::string_view file, OptLevel level);

}  // namespace hwdbg
