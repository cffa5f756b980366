#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kbm {

struct TomlError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Minimal TOML subset: [tables], [[arrays of tables]], dotted table headers,
// key = value with strings, integers, floats, booleans and flat arrays,
// # comments. Enough for the run configs; parse errors carry line numbers.
class TomlValue {
  public:
    using Array = std::vector<TomlValue>;
    std::variant<std::string, int64_t, double, bool, Array> data;

    bool is_string() const { return data.index() == 0; }
    bool is_number() const { return data.index() == 1 || data.index() == 2; }
    bool is_bool() const { return data.index() == 3; }
    bool is_array() const { return data.index() == 4; }

    const std::string& as_string() const;
    double as_double() const;
    int64_t as_int() const;
    bool as_bool() const;
    const Array& as_array() const;
    std::vector<double> as_double_array() const;
};

class TomlTable {
  public:
    std::map<std::string, TomlValue> values;
    std::map<std::string, TomlTable> tables;
    std::map<std::string, std::vector<TomlTable>> table_arrays;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    const TomlValue& at(const std::string& key) const;
    const TomlTable* table(const std::string& key) const;
    const std::vector<TomlTable>* array(const std::string& key) const;

    // typed lookups with defaults
    double number_or(const std::string& key, double fallback) const;
    int64_t int_or(const std::string& key, int64_t fallback) const;
    bool bool_or(const std::string& key, bool fallback) const;
    std::string string_or(const std::string& key, const std::string& fallback) const;
};

TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::string& path);

}  // namespace kbm
