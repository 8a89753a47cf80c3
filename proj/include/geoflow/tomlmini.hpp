#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace geoflow {

// Small flat TOML subset: [section] headers and key = value lines where the
// value is an integer, float, bool or quoted string. Keys are stored in
// insertion order as "section.key" so serialization is deterministic.
class TomlDoc {
 public:
  enum class Kind { Int, Float, Bool, String };

  struct Item {
    std::string key;  // "section.key" or bare "key"
    Kind kind;
    std::string text;  // normalized literal text
  };

  static TomlDoc parse(const std::string& text, const std::string& origin = "<string>");
  static TomlDoc load(const std::string& path);

  std::string serialize() const;
  void save(const std::string& path) const;

  bool has(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;

  void set_int(const std::string& key, int64_t v);
  void set_double(const std::string& key, double v);
  void set_bool(const std::string& key, bool v);
  void set_string(const std::string& key, const std::string& v);

  const std::vector<Item>& items() const { return items_; }

 private:
  const Item* find(const std::string& key) const;
  void set(const std::string& key, Kind kind, std::string text);
  std::vector<Item> items_;
};

}  // namespace geoflow
