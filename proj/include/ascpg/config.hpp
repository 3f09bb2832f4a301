#pragma once

// Flat key = value configuration files with [section] headers.
//
//   # comment
//   [problem]
//   family = random_mdp
//   states = 100      # trailing comments are allowed
//
// Parsing is strict: malformed lines, duplicate sections or keys, and keys
// that the consumer never reads are errors carrying the offending line.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ascpg::config {

class config_error : public std::runtime_error {
public:
  config_error(const std::string& source, int line, const std::string& msg)
      : std::runtime_error(format(source, line, msg)), line_(line) {}

  int line() const { return line_; }

private:
  static std::string format(const std::string& source, int line, const std::string& msg) {
    std::string out = source.empty() ? std::string("config") : source;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + msg;
  }

  int line_;
};

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Entry {
  std::string value;
  int line = 0;
  mutable bool used = false;
};

class Section {
public:
  Section() = default;
  Section(std::string name, int line, std::string source)
      : name_(std::move(name)), line_(line), source_(std::move(source)) {}

  const std::string& name() const { return name_; }
  int line() const { return line_; }
  const std::string& source() const { return source_; }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  void add(const std::string& key, std::string value, int line) {
    auto [it, inserted] = entries_.emplace(key, Entry{std::move(value), line});
    if (!inserted) {
      throw config_error(source_, line,
                         "duplicate key '" + key + "' (first set on line " +
                             std::to_string(it->second.line) + ")");
    }
  }

  /// Set or replace a value from outside the file (line 0).
  void assign(const std::string& key, std::string value) {
    entries_[key] = Entry{std::move(value), 0};
  }

  const Entry* find(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? line_ : it->second.line;
  }

  std::optional<std::string> get_string(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    if (e->value.empty()) fail(*e, key, "empty value");
    return e->value;
  }

  std::optional<double> get_double(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    return parse_double(*e, key, e->value);
  }

  std::optional<std::int64_t> get_int(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    return parse_int(*e, key, e->value);
  }

  std::optional<bool> get_bool(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    const std::string& v = e->value;
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    fail(*e, key, "expected a boolean (true/false), got '" + v + "'");
  }

  std::optional<std::vector<double>> get_doubles(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    for (const auto& item : split_list(*e, key)) out.push_back(parse_double(*e, key, item));
    return out;
  }

  std::optional<std::vector<std::int64_t>> get_ints(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    std::vector<std::int64_t> out;
    for (const auto& item : split_list(*e, key)) out.push_back(parse_int(*e, key, item));
    return out;
  }

  std::optional<std::vector<std::string>> get_strings(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    return split_list(*e, key);
  }

  /// Error for a key whose value was read but is semantically invalid.
  [[noreturn]] void invalid(const std::string& key, const std::string& msg) const {
    throw config_error(source_, line_of(key), "[" + name_ + "] " + key + ": " + msg);
  }

  /// Reject every key that was never read.
  void require_all_used(const std::string& context = {}) const {
    for (const auto& [key, e] : entries_) {
      if (!e.used) {
        std::string msg = "unknown key '" + key + "' in section [" + name_ + "]";
        if (!context.empty()) msg += " " + context;
        throw config_error(source_, e.line, msg);
      }
    }
  }

private:
  [[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& msg) const {
    throw config_error(source_, e.line, "[" + name_ + "] " + key + ": " + msg);
  }

  double parse_double(const Entry& e, const std::string& key, std::string_view text) const {
    text = trim(text);
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (text.empty() || ec != std::errc() || ptr != last) {
      fail(e, key, "expected a number, got '" + std::string(text) + "'");
    }
    return v;
  }

  std::int64_t parse_int(const Entry& e, const std::string& key, std::string_view text) const {
    text = trim(text);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
      fail(e, key, "expected an integer, got '" + std::string(text) + "'");
    }
    return v;
  }

  std::vector<std::string> split_list(const Entry& e, const std::string& key) const {
    std::vector<std::string> out;
    std::string_view rest = e.value;
    for (;;) {
      const auto comma = rest.find(',');
      const std::string_view item = trim(rest.substr(0, comma));
      if (item.empty()) fail(e, key, "empty list item");
      out.emplace_back(item);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  std::string name_;
  int line_ = 0;
  std::string source_;
  std::map<std::string, Entry> entries_;
};

class KeyValueFile {
public:
  static KeyValueFile parse(std::istream& is, const std::string& source = {}) {
    KeyValueFile file;
    file.source_ = source;
    std::string raw;
    int line = 0;
    Section* current = nullptr;
    while (std::getline(is, raw)) {
      ++line;
      std::string_view text = raw;
      if (const auto hash = text.find('#'); hash != std::string_view::npos) {
        text = text.substr(0, hash);
      }
      text = trim(text);
      if (text.empty()) continue;
      if (text.front() == '[') {
        if (text.back() != ']' || text.size() < 3) {
          throw config_error(source, line, "malformed section header '" + std::string(text) + "'");
        }
        const std::string name(trim(text.substr(1, text.size() - 2)));
        if (!valid_name(name)) {
          throw config_error(source, line, "invalid section name '" + name + "'");
        }
        if (file.sections_.count(name)) {
          throw config_error(source, line, "duplicate section [" + name + "]");
        }
        current = &file.sections_.emplace(name, Section(name, line, source)).first->second;
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string_view::npos) {
        throw config_error(source, line, "expected 'key = value', got '" + std::string(text) + "'");
      }
      const std::string key(trim(text.substr(0, eq)));
      const std::string value(trim(text.substr(eq + 1)));
      if (!valid_name(key)) throw config_error(source, line, "invalid key '" + key + "'");
      if (!current) {
        throw config_error(source, line, "key '" + key + "' appears before any [section]");
      }
      current->add(key, value, line);
    }
    return file;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(path, 0, "cannot open file");
    return parse(in, path);
  }

  const std::string& source() const { return source_; }

  /// The named section, or an empty one (so optional keys read as absent).
  const Section& section(const std::string& name) const {
    auto it = sections_.find(name);
    if (it != sections_.end()) return it->second;
    auto [slot, _] = empty_.emplace(name, Section(name, 0, source_));
    return slot->second;
  }

  bool has_section(const std::string& name) const { return sections_.count(name) > 0; }

  /// Apply a "section.key=value" override on top of the parsed file.
  void assign(const std::string& dotted) {
    const auto eq = dotted.find('=');
    const auto dot = dotted.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw config_error("--set", 0, "expected section.key=value, got '" + dotted + "'");
    }
    const std::string section_name(trim(std::string_view(dotted).substr(0, dot)));
    const std::string key(trim(std::string_view(dotted).substr(dot + 1, eq - dot - 1)));
    const std::string value(trim(std::string_view(dotted).substr(eq + 1)));
    if (!valid_name(section_name) || !valid_name(key)) {
      throw config_error("--set", 0, "invalid name in '" + dotted + "'");
    }
    auto it = sections_.find(section_name);
    if (it == sections_.end()) {
      it = sections_.emplace(section_name, Section(section_name, 0, source_)).first;
    }
    it->second.assign(key, value);
  }

  void require_known_sections(const std::vector<std::string>& known) const {
    for (const auto& [name, sec] : sections_) {
      bool ok = false;
      for (const auto& k : known) ok = ok || k == name;
      if (!ok) throw config_error(source_, sec.line(), "unknown section [" + name + "]");
    }
  }

private:
  static bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) {
        return false;
      }
    }
    return true;
  }

  std::string source_;
  std::map<std::string, Section> sections_;
  mutable std::map<std::string, Section> empty_;
};

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, ptr);
}

}  // namespace ascpg::config
