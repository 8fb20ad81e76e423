#include "hwdbg/symtab.hpp"

#include <sqlite3.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <tuple>

#include "json.hpp"

namespace hwdbg {

// ---------------------------------------------------------------------------
// In-memory table

void SymbolTable::build_index() {
  instance_index_.clear();
  breakpoint_index_.clear();
  variable_index_.clear();
  by_line_.clear();
  scope_index_.clear();
  for (size_t i = 0; i < instances.size(); ++i) instance_index_[instances[i].id] = i;
  for (size_t i = 0; i < breakpoints.size(); ++i) {
    breakpoint_index_[breakpoints[i].id] = i;
    by_line_[{breakpoints[i].file, breakpoints[i].line}].push_back(i);
  }
  for (auto& [key, rows] : by_line_) {
    std::sort(rows.begin(), rows.end(), [&](size_t a, size_t b) {
      return breakpoints[a].order_index < breakpoints[b].order_index;
    });
  }
  for (size_t i = 0; i < variables.size(); ++i) variable_index_[variables[i].id] = i;
  for (size_t i = 0; i < scope_variables.size(); ++i) {
    scope_index_[scope_variables[i].breakpoint_id].push_back(i);
  }
}

void SymbolTable::validate() const {
  std::set<int64_t> inst_ids;
  std::set<std::string> inst_names;
  for (const auto& r : instances) {
    if (!inst_ids.insert(r.id).second) throw Error("duplicate instance id " + std::to_string(r.id));
    if (!inst_names.insert(r.name).second) throw Error("duplicate instance '" + r.name + "'");
  }
  for (const auto& r : instances) {
    const auto dot = r.name.rfind('.');
    if (dot != std::string::npos && !inst_names.count(r.name.substr(0, dot))) {
      throw Error("instance '" + r.name + "' has no parent row");
    }
  }
  std::set<int64_t> bp_ids;
  std::set<std::tuple<int64_t, std::string, uint32_t, uint32_t, uint32_t>> keys;
  std::map<std::string, std::vector<const BreakpointRow*>> per_file;
  for (const auto& r : breakpoints) {
    if (!bp_ids.insert(r.id).second) throw Error("duplicate breakpoint id " + std::to_string(r.id));
    if (!inst_ids.count(r.instance_id)) {
      throw Error("breakpoint " + std::to_string(r.id) + " references a missing instance");
    }
    if (!keys.emplace(r.instance_id, r.file, r.line, r.column, r.ordinal).second) {
      throw Error("duplicate breakpoint location in " + r.file + ":" + std::to_string(r.line));
    }
    per_file[r.file].push_back(&r);
  }
  for (auto& [file, rows] : per_file) {
    std::sort(rows.begin(), rows.end(),
              [](const BreakpointRow* a, const BreakpointRow* b) { return a->order_index < b->order_index; });
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i]->order_index != i) throw Error("order_index of " + file + " is not dense");
      if (i > 0 && std::tie(rows[i - 1]->line, rows[i - 1]->column, rows[i - 1]->ordinal) >
                       std::tie(rows[i]->line, rows[i]->column, rows[i]->ordinal)) {
        throw Error("order_index of " + file + " disagrees with source order");
      }
    }
  }
  std::set<int64_t> var_ids;
  for (const auto& r : variables) {
    if (!var_ids.insert(r.id).second) throw Error("duplicate variable id " + std::to_string(r.id));
    if (!inst_ids.count(r.instance_id)) {
      throw Error("variable " + std::to_string(r.id) + " references a missing instance");
    }
  }
  std::set<std::pair<int64_t, std::string>> scope_keys;
  for (const auto& r : scope_variables) {
    if (!bp_ids.count(r.breakpoint_id) || !var_ids.count(r.variable_id)) {
      throw Error("scope variable '" + r.source_name + "' has a dangling reference");
    }
    if (!scope_keys.emplace(r.breakpoint_id, r.source_name).second) {
      throw Error("duplicate scope variable '" + r.source_name + "'");
    }
  }
}

std::vector<BreakpointRow> SymbolTable::breakpoints_at(std::string_view file, uint32_t line,
                                                       std::optional<uint32_t> column) const {
  std::vector<BreakpointRow> out;
  auto it = by_line_.find({std::string(file), line});
  if (it == by_line_.end()) return out;
  for (size_t i : it->second) {
    if (!column || breakpoints[i].column == *column) out.push_back(breakpoints[i]);
  }
  return out;
}

std::vector<NamedVariable> SymbolTable::scope_of(int64_t breakpoint_id) const {
  if (breakpoint(breakpoint_id) == nullptr) {
    throw Error("unknown breakpoint id " + std::to_string(breakpoint_id));
  }
  std::vector<NamedVariable> out;
  auto it = scope_index_.find(breakpoint_id);
  if (it == scope_index_.end()) return out;
  for (size_t i : it->second) {
    const ScopeVariableRow& s = scope_variables[i];
    out.emplace_back(s.source_name, *variable(s.variable_id));
  }
  return out;
}

std::vector<NamedVariable> SymbolTable::instance_variables(int64_t instance_id) const {
  std::vector<NamedVariable> out;
  for (const auto& v : variables) {
    if (v.is_instance_var && v.instance_id == instance_id) out.emplace_back(v.source_name, v);
  }
  return out;
}

std::string SymbolTable::resolve_scoped(int64_t breakpoint_id, std::string_view source_name) const {
  for (const auto& [name, v] : scope_of(breakpoint_id)) {
    if (name == source_name) return v.rtl_name;
  }
  return resolve_instance(breakpoint(breakpoint_id)->instance_id, source_name);
}

std::string SymbolTable::resolve_instance(int64_t instance_id, std::string_view source_name) const {
  for (const auto& v : variables) {
    if (v.is_instance_var && v.instance_id == instance_id && v.source_name == source_name) {
      return v.rtl_name;
    }
  }
  throw Error("unknown name '" + std::string(source_name) + "' in scope");
}

const InstanceRow* SymbolTable::instance(int64_t id) const {
  auto it = instance_index_.find(id);
  return it == instance_index_.end() ? nullptr : &instances[it->second];
}

const InstanceRow* SymbolTable::instance_by_name(std::string_view name) const {
  for (const auto& r : instances) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const BreakpointRow* SymbolTable::breakpoint(int64_t id) const {
  auto it = breakpoint_index_.find(id);
  return it == breakpoint_index_.end() ? nullptr : &breakpoints[it->second];
}

const VariableRow* SymbolTable::variable(int64_t id) const {
  auto it = variable_index_.find(id);
  return it == variable_index_.end() ? nullptr : &variables[it->second];
}

std::vector<std::string> SymbolTable::files() const {
  std::vector<std::string> out;
  for (const auto& b : breakpoints) {
    if (std::find(out.begin(), out.end(), b.file) == out.end()) out.push_back(b.file);
  }
  return out;
}

std::optional<std::string> SymbolTable::match_file(std::string_view path) const {
  const auto all = files();
  for (const auto& f : all) {
    if (f == path) return f;
  }
  std::optional<std::string> found;
  const std::string suffix = "/" + std::string(path);
  for (const auto& f : all) {
    if (f.size() > suffix.size() && f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0) {
      if (found) return std::nullopt;
      found = f;
    }
  }
  return found;
}

std::vector<uint32_t> SymbolTable::breakpoint_lines(std::string_view file) const {
  std::set<uint32_t> lines;
  for (const auto& b : breakpoints) {
    if (b.file == file) lines.insert(b.line);
  }
  return {lines.begin(), lines.end()};
}

void SymbolTable::compute_order() {
  std::map<int64_t, std::string> paths;
  for (const auto& r : instances) paths[r.id] = r.name;
  std::map<std::string, std::vector<size_t>> per_file;
  for (size_t i = 0; i < breakpoints.size(); ++i) per_file[breakpoints[i].file].push_back(i);
  for (auto& [file, rows] : per_file) {
    std::sort(rows.begin(), rows.end(), [&](size_t a, size_t b) {
      const auto& x = breakpoints[a];
      const auto& y = breakpoints[b];
      return std::tie(x.line, x.column, x.ordinal, paths[x.instance_id]) <
             std::tie(y.line, y.column, y.ordinal, paths[y.instance_id]);
    });
    for (size_t k = 0; k < rows.size(); ++k) {
      breakpoints[rows[k]].order_index = static_cast<uint32_t>(k);
    }
  }
}

bool SymbolTable::operator==(const SymbolTable& o) const {
  return instances == o.instances && breakpoints == o.breakpoints && variables == o.variables &&
         scope_variables == o.scope_variables;
}

// ---------------------------------------------------------------------------
// SQLite storage

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE instance (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL UNIQUE,
  module_name TEXT NOT NULL
);
CREATE TABLE breakpoint (
  id INTEGER PRIMARY KEY,
  instance_id INTEGER NOT NULL REFERENCES instance(id),
  file TEXT NOT NULL,
  line INTEGER NOT NULL,
  column_num INTEGER NOT NULL,
  ordinal INTEGER NOT NULL,
  enable TEXT NOT NULL,
  order_index INTEGER NOT NULL,
  UNIQUE (instance_id, file, line, column_num, ordinal)
);
CREATE INDEX breakpoint_location ON breakpoint (file, line);
CREATE TABLE variable (
  id INTEGER PRIMARY KEY,
  rtl_name TEXT NOT NULL,
  source_name TEXT NOT NULL,
  is_instance_var INTEGER NOT NULL,
  instance_id INTEGER NOT NULL REFERENCES instance(id)
);
CREATE TABLE scope_variable (
  breakpoint_id INTEGER NOT NULL REFERENCES breakpoint(id),
  variable_id INTEGER NOT NULL REFERENCES variable(id),
  source_name TEXT NOT NULL,
  UNIQUE (breakpoint_id, source_name)
);
)sql";

class Db {
 public:
  Db(const std::string& path, int flags) {
    if (sqlite3_open_v2(path.c_str(), &db_, flags, nullptr) != SQLITE_OK) {
      const std::string msg = db_ != nullptr ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      db_ = nullptr;
      throw Error("cannot open symbol table '" + path + "': " + msg);
    }
  }
  ~Db() { sqlite3_close(db_); }
  Db(const Db&) = delete;
  Db& operator=(const Db&) = delete;

  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      const std::string msg = err != nullptr ? err : "unknown error";
      sqlite3_free(err);
      throw Error("symbol table: " + msg);
    }
  }

  sqlite3* get() const { return db_; }

 private:
  sqlite3* db_ = nullptr;
};

class Stmt {
 public:
  Stmt(const Db& db, const char* sql) : db_(db.get()) {
    if (sqlite3_prepare_v2(db_, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      throw Error(std::string("symbol table: ") + sqlite3_errmsg(db_));
    }
  }
  ~Stmt() { sqlite3_finalize(stmt_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int i, int64_t v) {
    sqlite3_bind_int64(stmt_, i, v);
    return *this;
  }
  Stmt& bind(int i, std::string_view v) {
    sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  // True while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw Error(std::string("symbol table: ") + sqlite3_errmsg(db_));
  }
  void run() {
    step();
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }
  void reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }
  int64_t i64(int col) const { return sqlite3_column_int64(stmt_, col); }
  std::string text(int col) const {
    const auto* p = sqlite3_column_text(stmt_, col);
    return p == nullptr ? std::string() : std::string(reinterpret_cast<const char*>(p));
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

BreakpointRow read_breakpoint(const Stmt& s) {
  BreakpointRow r;
  r.id = s.i64(0);
  r.instance_id = s.i64(1);
  r.file = s.text(2);
  r.line = static_cast<uint32_t>(s.i64(3));
  r.column = static_cast<uint32_t>(s.i64(4));
  r.ordinal = static_cast<uint32_t>(s.i64(5));
  r.enable = s.text(6);
  r.order_index = static_cast<uint32_t>(s.i64(7));
  return r;
}

constexpr const char* kBreakpointColumns =
    "id, instance_id, file, line, column_num, ordinal, enable, order_index";

VariableRow read_variable(const Stmt& s, int first) {
  VariableRow r;
  r.id = s.i64(first);
  r.rtl_name = s.text(first + 1);
  r.source_name = s.text(first + 2);
  r.is_instance_var = s.i64(first + 3) != 0;
  r.instance_id = s.i64(first + 4);
  return r;
}

// Opens a stored table read-only after checking integrity and version.
std::unique_ptr<Db> open_checked(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error("cannot open symbol table '" + path + "': no such file");
  }
  auto db = std::make_unique<Db>(path, SQLITE_OPEN_READONLY);
  try {
    Stmt check(*db, "PRAGMA quick_check");
    if (!check.step() || check.text(0) != "ok") throw Error("integrity check failed");
    Stmt version(*db, "PRAGMA user_version");
    version.step();
    const int64_t v = version.i64(0);
    if (v != kSymtabSchemaVersion) {
      throw Error("schema version " + std::to_string(v) + ", expected " +
                  std::to_string(kSymtabSchemaVersion));
    }
  } catch (const Error& e) {
    throw Error("malformed symbol table '" + path + "': " + e.what());
  }
  return db;
}

}  // namespace

void store(const SymbolTable& table, const std::string& path) {
  table.validate();
  const std::string tmp = path + ".tmp" + std::to_string(::getpid());
  std::filesystem::remove(tmp);
  try {
    {
      Db db(tmp, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
      db.exec("PRAGMA journal_mode = OFF; BEGIN;");
      db.exec(kSchema);
      db.exec(("PRAGMA user_version = " + std::to_string(kSymtabSchemaVersion)).c_str());
      Stmt meta(db, "INSERT INTO meta VALUES ('schema_version', ?)");
      meta.bind(1, std::to_string(kSymtabSchemaVersion)).run();

      Stmt ins(db, "INSERT INTO instance VALUES (?, ?, ?)");
      for (const auto& r : table.instances) ins.bind(1, r.id).bind(2, r.name).bind(3, r.module_name).run();
      Stmt bp(db, "INSERT INTO breakpoint VALUES (?, ?, ?, ?, ?, ?, ?, ?)");
      for (const auto& r : table.breakpoints) {
        bp.bind(1, r.id).bind(2, r.instance_id).bind(3, r.file).bind(4, int64_t{r.line});
        bp.bind(5, int64_t{r.column}).bind(6, int64_t{r.ordinal}).bind(7, r.enable);
        bp.bind(8, int64_t{r.order_index}).run();
      }
      Stmt var(db, "INSERT INTO variable VALUES (?, ?, ?, ?, ?)");
      for (const auto& r : table.variables) {
        var.bind(1, r.id).bind(2, r.rtl_name).bind(3, r.source_name);
        var.bind(4, int64_t{r.is_instance_var ? 1 : 0}).bind(5, r.instance_id).run();
      }
      Stmt sv(db, "INSERT INTO scope_variable VALUES (?, ?, ?)");
      for (const auto& r : table.scope_variables) {
        sv.bind(1, r.breakpoint_id).bind(2, r.variable_id).bind(3, r.source_name).run();
      }
      db.exec("COMMIT;");
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

SymbolTable load(const std::string& path) {
  auto db = open_checked(path);
  SymbolTable t;
  try {
    Stmt ins(*db, "SELECT id, name, module_name FROM instance ORDER BY id");
    while (ins.step()) t.instances.push_back(InstanceRow{ins.i64(0), ins.text(1), ins.text(2)});
    Stmt bp(*db, (std::string("SELECT ") + kBreakpointColumns + " FROM breakpoint ORDER BY id").c_str());
    while (bp.step()) t.breakpoints.push_back(read_breakpoint(bp));
    Stmt var(*db,
             "SELECT id, rtl_name, source_name, is_instance_var, instance_id FROM variable "
             "ORDER BY id");
    while (var.step()) t.variables.push_back(read_variable(var, 0));
    Stmt sv(*db,
            "SELECT breakpoint_id, variable_id, source_name FROM scope_variable ORDER BY rowid");
    while (sv.step()) t.scope_variables.push_back(ScopeVariableRow{sv.i64(0), sv.i64(1), sv.text(2)});
    t.validate();
  } catch (const Error& e) {
    throw Error("malformed symbol table '" + path + "': " + e.what());
  }
  t.build_index();
  return t;
}

// ---------------------------------------------------------------------------
// JSON

std::string to_json(const SymbolTable& t) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema_version"] = kSymtabSchemaVersion;
  j["instances"] = ordered_json::array();
  for (const auto& r : t.instances) {
    j["instances"].push_back({{"id", r.id}, {"name", r.name}, {"module_name", r.module_name}});
  }
  j["breakpoints"] = ordered_json::array();
  for (const auto& r : t.breakpoints) {
    j["breakpoints"].push_back({{"id", r.id},
                                {"instance_id", r.instance_id},
                                {"file", r.file},
                                {"line", r.line},
                                {"column", r.column},
                                {"ordinal", r.ordinal},
                                {"enable", r.enable},
                                {"order_index", r.order_index}});
  }
  j["variables"] = ordered_json::array();
  for (const auto& r : t.variables) {
    j["variables"].push_back({{"id", r.id},
                              {"rtl_name", r.rtl_name},
                              {"source_name", r.source_name},
                              {"is_instance_var", r.is_instance_var},
                              {"instance_id", r.instance_id}});
  }
  j["scope_variables"] = ordered_json::array();
  for (const auto& r : t.scope_variables) {
    j["scope_variables"].push_back({{"breakpoint_id", r.breakpoint_id},
                                    {"variable_id", r.variable_id},
                                    {"source_name", r.source_name}});
  }
  return j.dump(2) + "\n";
}

SymbolTable from_json(std::string_view text) {
  SymbolTable t;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != kSymtabSchemaVersion) {
      throw Error("unsupported schema version");
    }
    for (const auto& r : j.at("instances")) {
      t.instances.push_back(InstanceRow{r.at("id"), r.at("name"), r.at("module_name")});
    }
    for (const auto& r : j.at("breakpoints")) {
      BreakpointRow b;
      b.id = r.at("id");
      b.instance_id = r.at("instance_id");
      b.file = r.at("file");
      b.line = r.at("line");
      b.column = r.at("column");
      b.ordinal = r.at("ordinal");
      b.enable = r.at("enable");
      b.order_index = r.at("order_index");
      t.breakpoints.push_back(std::move(b));
    }
    for (const auto& r : j.at("variables")) {
      t.variables.push_back(VariableRow{r.at("id"), r.at("rtl_name"), r.at("source_name"),
                                        r.at("is_instance_var"), r.at("instance_id")});
    }
    for (const auto& r : j.at("scope_variables")) {
      t.scope_variables.push_back(
          ScopeVariableRow{r.at("breakpoint_id"), r.at("variable_id"), r.at("source_name")});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed symbol table JSON: ") + e.what());
  }
  t.validate();
  t.build_index();
  return t;
}

// ---------------------------------------------------------------------------
// SQL-backed provider

struct SqlSymbolSource::Impl {
  std::unique_ptr<Db> db;
};

SqlSymbolSource::SqlSymbolSource(const std::string& path) : impl_(std::make_unique<Impl>()) {
  impl_->db = open_checked(path);
}

SqlSymbolSource::~SqlSymbolSource() = default;

std::vector<BreakpointRow> SqlSymbolSource::breakpoints_at(std::string_view file, uint32_t line,
                                                           std::optional<uint32_t> column) const {
  std::string sql = std::string("SELECT ") + kBreakpointColumns +
                    " FROM breakpoint WHERE file = ? AND line = ?";
  if (column) sql += " AND column_num = ?";
  sql += " ORDER BY order_index";
  Stmt s(*impl_->db, sql.c_str());
  s.bind(1, file).bind(2, int64_t{line});
  if (column) s.bind(3, int64_t{*column});
  std::vector<BreakpointRow> out;
  while (s.step()) out.push_back(read_breakpoint(s));
  return out;
}

std::vector<NamedVariable> SqlSymbolSource::scope_of(int64_t breakpoint_id) const {
  Stmt exists(*impl_->db, "SELECT 1 FROM breakpoint WHERE id = ?");
  exists.bind(1, breakpoint_id);
  if (!exists.step()) throw Error("unknown breakpoint id " + std::to_string(breakpoint_id));
  Stmt s(*impl_->db,
         "SELECT sv.source_name, v.id, v.rtl_name, v.source_name, v.is_instance_var, "
         "v.instance_id FROM scope_variable sv JOIN variable v ON v.id = sv.variable_id "
         "WHERE sv.breakpoint_id = ? ORDER BY sv.rowid");
  s.bind(1, breakpoint_id);
  std::vector<NamedVariable> out;
  while (s.step()) out.emplace_back(s.text(0), read_variable(s, 1));
  return out;
}

std::vector<NamedVariable> SqlSymbolSource::instance_variables(int64_t instance_id) const {
  Stmt s(*impl_->db,
         "SELECT source_name, id, rtl_name, source_name, is_instance_var, instance_id "
         "FROM variable WHERE instance_id = ? AND is_instance_var = 1 ORDER BY id");
  s.bind(1, instance_id);
  std::vector<NamedVariable> out;
  while (s.step()) out.emplace_back(s.text(0), read_variable(s, 1));
  return out;
}

std::string SqlSymbolSource::resolve_scoped(int64_t breakpoint_id,
                                            std::string_view source_name) const {
  Stmt s(*impl_->db,
         "SELECT v.rtl_name FROM scope_variable sv JOIN variable v ON v.id = sv.variable_id "
         "WHERE sv.breakpoint_id = ? AND sv.source_name = ?");
  s.bind(1, breakpoint_id).bind(2, source_name);
  if (s.step()) return s.text(0);
  Stmt bp(*impl_->db, "SELECT instance_id FROM breakpoint WHERE id = ?");
  bp.bind(1, breakpoint_id);
  if (!bp.step()) throw Error("unknown breakpoint id " + std::to_string(breakpoint_id));
  return resolve_instance(bp.i64(0), source_name);
}

std::string SqlSymbolSource::resolve_instance(int64_t instance_id,
                                              std::string_view source_name) const {
  Stmt s(*impl_->db,
         "SELECT rtl_name FROM variable WHERE instance_id = ? AND is_instance_var = 1 "
         "AND source_name = ? ORDER BY id LIMIT 1");
  s.bind(1, instance_id).bind(2, source_name);
  if (s.step()) return s.text(0);
  throw Error("unknown name '" + std::string(source_name) + "' in scope");
}

}  // namespace hwdbg
