#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hwdbg/value.hpp"

namespace hwdbg {

struct InstanceRow {
  int64_t id = 0;
  std::string name;  // `top`, `top.u0`
  std::string module_name;

  bool operator==(const InstanceRow&) const = default;
};

struct BreakpointRow {
  int64_t id = 0;
  int64_t instance_id = 0;
  std::string file;
  uint32_t line = 0;
  uint32_t column = 0;
  uint32_t ordinal = 0;
  std::string enable;  // expression over RTL names; `1` when unconditional
  uint32_t order_index = 0;

  bool operator==(const BreakpointRow&) const = default;
};

struct VariableRow {
  int64_t id = 0;
  std::string rtl_name;  // hierarchical net name, or a decimal constant
  std::string source_name;
  bool is_instance_var = false;
  int64_t instance_id = 0;

  bool operator==(const VariableRow&) const = default;
};

struct ScopeVariableRow {
  int64_t breakpoint_id = 0;
  int64_t variable_id = 0;
  std::string source_name;

  bool operator==(const ScopeVariableRow&) const = default;
};

using NamedVariable = std::pair<std::string, VariableRow>;

// Read-side interface shared by the in-memory table and the SQL-backed
// provider.
class SymbolSource {
 public:
  virtual ~SymbolSource() = default;

  // Rows matching (file, line[, column]) across all instances, by order_index.
  virtual std::vector<BreakpointRow> breakpoints_at(std::string_view file, uint32_t line,
                                                    std::optional<uint32_t> column) const = 0;
  // Frame-local variables of a breakpoint. Throws Error for unknown ids.
  virtual std::vector<NamedVariable> scope_of(int64_t breakpoint_id) const = 0;
  virtual std::vector<NamedVariable> instance_variables(int64_t instance_id) const = 0;
  // Throws Error when the name is not visible.
  virtual std::string resolve_scoped(int64_t breakpoint_id, std::string_view source_name) const = 0;
  virtual std::string resolve_instance(int64_t instance_id, std::string_view source_name) const = 0;
};

class SymbolTable : public SymbolSource {
 public:
  std::vector<InstanceRow> instances;
  std::vector<BreakpointRow> breakpoints;
  std::vector<VariableRow> variables;
  std::vector<ScopeVariableRow> scope_variables;

  // Must be called after rows are modified and before queries.
  void build_index();

  // Throws Error on broken foreign keys, duplicate keys, or a non-dense
  // order_index.
  void validate() const;

  std::vector<BreakpointRow> breakpoints_at(std::string_view file, uint32_t line,
                                            std::optional<uint32_t> column) const override;
  std::vector<NamedVariable> scope_of(int64_t breakpoint_id) const override;
  std::vector<NamedVariable> instance_variables(int64_t instance_id) const override;
  std::string resolve_scoped(int64_t breakpoint_id, std::string_view source_name) const override;
  std::string resolve_instance(int64_t instance_id, std::string_view source_name) const override;

  const InstanceRow* instance(int64_t id) const;
  const InstanceRow* instance_by_name(std::string_view name) const;
  const BreakpointRow* breakpoint(int64_t id) const;
  const VariableRow* variable(int64_t id) const;

  // Distinct source files in breakpoint order.
  std::vector<std::string> files() const;
  // The stored file a user-supplied path refers to: an exact match, else the
  // unique stored path ending in `/<path>`.
  std::optional<std::string> match_file(std::string_view path) const;
  // Lines of a file that carry at least one breakpoint.
  std::vector<uint32_t> breakpoint_lines(std::string_view file) const;

  // Recomputes order_index: per file, sorted by (line, column, ordinal,
  // instance path), numbered densely from 0.
  void compute_order();

  bool operator==(const SymbolTable& other) const;

 private:
  std::map<int64_t, size_t> instance_index_;
  std::map<int64_t, size_t> breakpoint_index_;
  std::map<int64_t, size_t> variable_index_;
  std::map<std::pair<std::string, uint32_t>, std::vector<size_t>> by_line_;
  std::map<int64_t, std::vector<size_t>> scope_index_;
};

inline constexpr int kSymtabSchemaVersion = 1;

// SQLite v3 file. The write goes to a temporary file that replaces `path`
// only once complete.
void store(const SymbolTable& table, const std::string& path);
// Throws Error for unreadable or malformed files and schema mismatches.
SymbolTable load(const std::string& path);

std::string to_json(const SymbolTable& table);
SymbolTable from_json(std::string_view text);

// Answers the query primitives with SQL against a stored table.
class SqlSymbolSource : public SymbolSource {
 public:
  explicit SqlSymbolSource(const std::string& path);
  ~SqlSymbolSource() override;
  SqlSymbolSource(const SqlSymbolSource&) = delete;
  SqlSymbolSource& operator=(const SqlSymbolSource&) = delete;

  std::vector<BreakpointRow> breakpoints_at(std::string_view file, uint32_t line,
                                            std::optional<uint32_t> column) const override;
  std::vector<NamedVariable> scope_of(int64_t breakpoint_id) const override;
  std::vector<NamedVariable> instance_variables(int64_t instance_id) const override;
  std::string resolve_scoped(int64_t breakpoint_id, std::string_view source_name) const override;
  std::string resolve_instance(int64_t instance_id, std::string_view source_name) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hwdbg
