#include "geoflow/tomlmini.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geoflow/errors.hpp"

namespace geoflow {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // keep a float marker so the kind survives a round trip
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

}  // namespace

TomlDoc TomlDoc::parse(const std::string& text, const std::string& origin) {
  TomlDoc doc;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw FormatError(origin + ":" + std::to_string(line_no) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw FormatError(origin + ":" + std::to_string(line_no) + ": empty section name");
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos) throw FormatError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty() || val.empty()) throw FormatError(origin + ":" + std::to_string(line_no) + ": empty key or value");
    std::string full = section.empty() ? key : section + "." + key;

    if (val.front() == '"') {
      if (val.size() < 2 || val.back() != '"')
        throw FormatError(origin + ":" + std::to_string(line_no) + ": unterminated string");
      doc.set(full, Kind::String, val.substr(1, val.size() - 2));
    } else if (val == "true" || val == "false") {
      doc.set(full, Kind::Bool, val);
    } else {
      bool is_float = val.find('.') != std::string::npos || val.find('e') != std::string::npos ||
                      val.find('E') != std::string::npos;
      try {
        size_t pos = 0;
        if (is_float) {
          (void)std::stod(val, &pos);
        } else {
          (void)std::stoll(val, &pos);
        }
        if (pos != val.size()) throw std::invalid_argument("trailing");
      } catch (...) {
        throw FormatError(origin + ":" + std::to_string(line_no) + ": bad numeric value '" + val + "'");
      }
      doc.set(full, is_float ? Kind::Float : Kind::Int, val);
    }
  }
  return doc;
}

TomlDoc TomlDoc::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open TOML file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string TomlDoc::serialize() const {
  std::string out, current_section;
  bool first = true;
  for (const auto& item : items_) {
    size_t dot = item.key.rfind('.');
    std::string section = dot == std::string::npos ? "" : item.key.substr(0, dot);
    std::string key = dot == std::string::npos ? item.key : item.key.substr(dot + 1);
    if (section != current_section || (first && !section.empty())) {
      if (!first) out += "\n";
      out += "[" + section + "]\n";
      current_section = section;
    }
    first = false;
    if (item.kind == Kind::String)
      out += key + " = \"" + item.text + "\"\n";
    else
      out += key + " = " + item.text + "\n";
  }
  return out;
}

void TomlDoc::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write TOML file: " + path);
  out << serialize();
}

const TomlDoc::Item* TomlDoc::find(const std::string& key) const {
  for (const auto& item : items_)
    if (item.key == key) return &item;
  return nullptr;
}

bool TomlDoc::has(const std::string& key) const { return find(key) != nullptr; }

int64_t TomlDoc::get_int(const std::string& key) const {
  const Item* it = find(key);
  if (!it) throw FormatError("missing TOML key: " + key);
  if (it->kind != Kind::Int) throw FormatError("TOML key is not an integer: " + key);
  return std::stoll(it->text);
}

double TomlDoc::get_double(const std::string& key) const {
  const Item* it = find(key);
  if (!it) throw FormatError("missing TOML key: " + key);
  if (it->kind != Kind::Float && it->kind != Kind::Int)
    throw FormatError("TOML key is not numeric: " + key);
  return std::stod(it->text);
}

bool TomlDoc::get_bool(const std::string& key) const {
  const Item* it = find(key);
  if (!it) throw FormatError("missing TOML key: " + key);
  if (it->kind != Kind::Bool) throw FormatError("TOML key is not a bool: " + key);
  return it->text == "true";
}

std::string TomlDoc::get_string(const std::string& key) const {
  const Item* it = find(key);
  if (!it) throw FormatError("missing TOML key: " + key);
  if (it->kind != Kind::String) throw FormatError("TOML key is not a string: " + key);
  return it->text;
}

void TomlDoc::set(const std::string& key, Kind kind, std::string text) {
  for (auto& item : items_) {
    if (item.key == key) {
      item.kind = kind;
      item.text = std::move(text);
      return;
    }
  }
  items_.push_back({key, kind, std::move(text)});
}

void TomlDoc::set_int(const std::string& key, int64_t v) { set(key, Kind::Int, std::to_string(v)); }
void TomlDoc::set_double(const std::string& key, double v) { set(key, Kind::Float, format_double(v)); }
void TomlDoc::set_bool(const std::string& key, bool v) { set(key, Kind::Bool, v ? "true" : "false"); }
void TomlDoc::set_string(const std::string& key, const std::string& v) { set(key, Kind::String, v); }

}  // namespace geoflow
