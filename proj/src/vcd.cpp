// VCD subset: $timescale, $scope, $var, $upscope, $enddefinitions, #time,
// scalar and binary vector changes. Other sections are skipped.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "hwdbg/sim.hpp"

namespace hwdbg {

std::optional<size_t> TraceStore::find(std::string_view name) const {
  for (size_t i = 0; i < signals.size(); ++i) {
    if (signals[i].name == name) return i;
  }
  for (const auto& [alias, i] : aliases) {
    if (alias == name) return i;
  }
  return std::nullopt;
}

bool TraceStore::operator==(const TraceStore& o) const {
  return timescale == o.timescale && signals == o.signals && aliases == o.aliases &&
         end_time == o.end_time;
}

namespace {

class VcdReader {
 public:
  explicit VcdReader(std::string_view text) : text_(text) {}

  TraceStore read() {
    std::vector<std::string> scopes;
    bool in_defs = true;
    bool have_time = false;
    uint64_t now = 0;
    std::string tok;
    while (next(tok)) {
      if (tok[0] == '$') {
        if (tok == "$timescale") {
          std::string ts;
          for (const auto& t : until_end()) ts += t;
          out_.timescale = ts;
        } else if (tok == "$scope") {
          auto args = until_end();
          if (args.size() != 2) fail("malformed $scope");
          scopes.push_back(args[1]);
        } else if (tok == "$upscope") {
          until_end();
          if (scopes.empty()) fail("$upscope without $scope");
          scopes.pop_back();
        } else if (tok == "$var") {
          if (!in_defs) fail("$var after $enddefinitions");
          declare(until_end(), scopes);
        } else if (tok == "$enddefinitions") {
          until_end();
          in_defs = false;
        } else if (tok == "$dumpvars" || tok == "$dumpall" || tok == "$dumpon" ||
                   tok == "$dumpoff" || tok == "$end") {
          // Markers around ordinary value changes.
        } else {
          until_end();  // $date, $version, $comment and unknown sections
        }
        continue;
      }
      if (in_defs) fail("value change before $enddefinitions");
      if (tok[0] == '#') {
        auto t = parse_uint(std::string_view(tok).substr(1));
        if (!t) fail("bad timestamp '" + tok + "'");
        if (have_time && *t < now) fail("timestamps must not decrease");
        now = *t;
        have_time = true;
        out_.end_time = std::max(out_.end_time, now);
        continue;
      }
      const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(tok[0])));
      if (c == 'b') {
        std::string id;
        if (!next(id)) fail("vector change without identifier");
        change(id, tok.substr(1), now);
      } else if (c == '0' || c == '1' || c == 'x' || c == 'z') {
        if (tok.size() < 2) fail("scalar change without identifier");
        change(tok.substr(1), tok.substr(0, 1), now);
      } else if (c == 'r') {
        fail("real values are not supported");
      } else {
        fail("unexpected token '" + tok + "'");
      }
    }
    if (in_defs) fail("missing $enddefinitions");
    return std::move(out_);
  }

 private:
  bool next(std::string& tok) {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ >= text_.size()) return false;
    const size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    tok.assign(text_.substr(start, pos_ - start));
    return true;
  }

  std::vector<std::string> until_end() {
    std::vector<std::string> out;
    std::string tok;
    while (next(tok)) {
      if (tok == "$end") return out;
      out.push_back(tok);
    }
    fail("missing $end");
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw Error("vcd line " + std::to_string(line_) + ": " + message);
  }

  void declare(const std::vector<std::string>& args, const std::vector<std::string>& scopes) {
    if (args.size() < 4) fail("malformed $var");
    const std::string& type = args[0];
    if (type != "wire" && type != "reg" && type != "integer" && type != "logic") {
      fail("unsupported variable type '" + type + "'");
    }
    auto width = parse_uint(args[1]);
    if (!width || *width == 0 || *width > kMaxWidth) fail("unsupported width '" + args[1] + "'");
    std::string name;
    for (const auto& s : scopes) name += s + ".";
    name += args[3];
    auto it = ids_.find(args[2]);
    if (it != ids_.end()) {
      if (out_.signals[it->second].width != *width) fail("identifier reused with another width");
      out_.aliases.emplace_back(name, it->second);
      return;
    }
    ids_[args[2]] = out_.signals.size();
    out_.signals.push_back(TraceSignal{name, static_cast<uint32_t>(*width), {}});
  }

  void change(const std::string& id, const std::string& digits, uint64_t now) {
    auto it = ids_.find(id);
    if (it == ids_.end()) fail("unknown identifier '" + id + "'");
    TraceSignal& s = out_.signals[it->second];
    if (digits.empty()) fail("empty value");
    if (digits.size() > s.width) fail("value wider than '" + s.name + "'");
    Value v = Value::make(0, s.width);
    uint64_t bits = 0;
    for (char d : digits) {
      switch (std::tolower(static_cast<unsigned char>(d))) {
        case '0':
          bits <<= 1;
          break;
        case '1':
          bits = (bits << 1) | 1;
          break;
        case 'x':
        case 'z':
          v = Value::unknown(s.width);
          break;
        default:
          fail("bad value digit '" + std::string(1, d) + "'");
      }
    }
    if (v.known) v = Value::make(bits, s.width);
    if (!s.changes.empty() && s.changes.back().first == now) {
      s.changes.back().second = v;
    } else {
      s.changes.emplace_back(now, v);
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
  size_t line_ = 1;
  TraceStore out_;
  std::unordered_map<std::string, size_t> ids_;
};

std::string id_code(size_t i) {
  std::string out;
  do {
    out += static_cast<char>('!' + i % 94);
    i /= 94;
  } while (i > 0);
  return out;
}

struct ScopeTree {
  std::string name;
  std::vector<std::pair<std::string, size_t>> vars;  // leaf, signal index
  std::vector<ScopeTree> children;

  ScopeTree& child(const std::string& n) {
    for (auto& c : children) {
      if (c.name == n) return c;
    }
    children.push_back(ScopeTree{n, {}, {}});
    return children.back();
  }
};

void write_scope(const ScopeTree& s, const TraceStore& t, std::ostringstream& out) {
  out << "$scope module " << s.name << " $end\n";
  for (const auto& [leaf, i] : s.vars) {
    out << "$var wire " << t.signals[i].width << " " << id_code(i) << " " << leaf << " $end\n";
  }
  for (const auto& c : s.children) write_scope(c, t, out);
  out << "$upscope $end\n";
}

std::string format_value(const Value& v, const std::string& id) {
  if (v.width == 1) return (v.known ? std::string(1, static_cast<char>('0' + (v.bits & 1))) : "x") + id;
  if (!v.known) return "bx " + id;
  std::string bits;
  for (uint32_t b = v.width; b-- > 0;) bits += ((v.bits >> b) & 1) ? '1' : '0';
  return "b" + bits + " " + id;
}

}  // namespace

TraceStore parse_vcd_text(std::string_view text) { return VcdReader(text).read(); }

TraceStore parse_vcd(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_vcd_text(ss.str());
}

std::string write_vcd(const TraceStore& t) {
  std::ostringstream out;
  out << "$timescale " << t.timescale << " $end\n";
  ScopeTree root;
  for (size_t i = 0; i < t.signals.size(); ++i) {
    const std::string& name = t.signals[i].name;
    ScopeTree* node = &root;
    size_t start = 0;
    for (size_t dot = name.find('.'); dot != std::string::npos; dot = name.find('.', start)) {
      node = &node->child(name.substr(start, dot - start));
      start = dot + 1;
    }
    node->vars.emplace_back(name.substr(start), i);
  }
  if (!root.vars.empty()) throw Error("trace signal '" + root.vars[0].first + "' has no scope");
  for (const auto& c : root.children) write_scope(c, t, out);
  out << "$enddefinitions $end\n";

  std::map<uint64_t, std::vector<std::pair<size_t, Value>>> by_time;
  for (size_t i = 0; i < t.signals.size(); ++i) {
    for (const auto& [time, v] : t.signals[i].changes) by_time[time].emplace_back(i, v);
  }
  for (const auto& [time, changes] : by_time) {
    out << "#" << time << "\n";
    for (const auto& [i, v] : changes) out << format_value(v, id_code(i)) << "\n";
  }
  if (by_time.empty() ? t.end_time > 0 : by_time.rbegin()->first < t.end_time) {
    out << "#" << t.end_time << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// VcdReplay

VcdReplay::VcdReplay(TraceStore trace, std::vector<std::string> clock_names)
    : VcdReplay(std::make_shared<const TraceStore>(std::move(trace)), std::move(clock_names)) {}

VcdReplay::VcdReplay(std::shared_ptr<const TraceStore> trace, std::vector<std::string> clock_names)
    : trace_(std::move(trace)) {
  std::vector<size_t> clock_ids;
  if (clock_names.empty()) {
    for (size_t i = 0; i < trace_->signals.size(); ++i) {
      const std::string& n = trace_->signals[i].name;
      const std::string leaf = n.substr(n.rfind('.') == std::string::npos ? 0 : n.rfind('.') + 1);
      if (leaf == "clk" || leaf == "clock") {
        clocks_.push_back(n);
        clock_ids.push_back(i);
      }
    }
  } else {
    for (const auto& n : clock_names) {
      auto id = trace_->find(n);
      if (!id) throw Error("clock '" + n + "' is not in the trace");
      clocks_.push_back(n);
      clock_ids.push_back(*id);
    }
  }
  for (size_t id : clock_ids) {
    bool high = false;
    for (const auto& [t, v] : trace_->signals[id].changes) {
      const bool now_high = v.known && v.bits == 1;
      if (now_high && !high) edges_.push_back(t);
      high = now_high;
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  size_t total = 0;
  for (const auto& sig : trace_->signals) total += sig.changes.size();
  changes_.reserve(total);
  for (size_t i = 0; i < trace_->signals.size(); ++i) {
    const auto& ch = trace_->signals[i].changes;
    for (size_t k = 0; k < ch.size(); ++k) {
      changes_.push_back(Change{ch[k].first, static_cast<uint32_t>(i), static_cast<uint32_t>(k)});
    }
    current_.push_back(Value::unknown(trace_->signals[i].width));
  }
  std::stable_sort(changes_.begin(), changes_.end(),
                   [](const Change& a, const Change& b) { return a.time < b.time; });
  seek(0);
}

void VcdReplay::seek(uint64_t t) {
  if (t < time_) {
    for (size_t i = 0; i < trace_->signals.size(); ++i) {
      const auto& ch = trace_->signals[i].changes;
      auto it = std::upper_bound(ch.begin(), ch.end(), t,
                                 [](uint64_t x, const auto& c) { return x < c.first; });
      current_[i] = it == ch.begin() ? Value::unknown(trace_->signals[i].width) : std::prev(it)->second;
    }
    applied_ = static_cast<size_t>(
        std::upper_bound(changes_.begin(), changes_.end(), t,
                         [](uint64_t x, const Change& c) { return x < c.time; }) -
        changes_.begin());
  } else {
    for (; applied_ < changes_.size() && changes_[applied_].time <= t; ++applied_) {
      const Change& c = changes_[applied_];
      current_[c.signal] = trace_->signals[c.signal].changes[c.index].second;
    }
  }
  time_ = t;
}

HierNode VcdReplay::hierarchy() const {
  HierNode root;
  for (const auto& s : trace_->signals) root.add_signal(s.name);
  for (const auto& [alias, i] : trace_->aliases) root.add_signal(alias);
  return root;
}

std::optional<int> VcdReplay::resolve(std::string_view name) const {
  auto id = trace_->find(name);
  if (!id) return std::nullopt;
  return static_cast<int>(*id);
}

Value VcdReplay::get_value(int signal) const { return current_[static_cast<size_t>(signal)]; }

void VcdReplay::set_time(uint64_t t) {
  if (t > trace_->end_time) {
    throw Error("time " + std::to_string(t) + " is beyond the end of the trace (" +
                std::to_string(trace_->end_time) + ")");
  }
  seek(t);
  cursor_ = t;
}

void VcdReplay::rewind() {
  seek(0);
  cursor_.reset();
  clear_stop();
}

std::optional<uint64_t> VcdReplay::previous_edge(uint64_t t) const {
  auto it = std::lower_bound(edges_.begin(), edges_.end(), t);
  if (it == edges_.begin()) return std::nullopt;
  return *std::prev(it);
}

uint64_t VcdReplay::run() {
  uint64_t n = 0;
  while (!stop_requested()) {
    auto it = cursor_ ? std::upper_bound(edges_.begin(), edges_.end(), *cursor_) : edges_.begin();
    if (it == edges_.end()) break;
    seek(*it);
    cursor_ = time_;
    fire_edge(time_);
    ++n;
  }
  return n;
}

}  // namespace hwdbg
