#include "kbm/toml.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace kbm {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    throw TomlError("config line " + std::to_string(line) + ": " + what);
}

struct Cursor {
    const std::string& s;
    size_t pos = 0;
    int line;

    void skip_ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
    bool done() {
        skip_ws();
        return pos >= s.size();
    }
    char peek() { return pos < s.size() ? s[pos] : '\0'; }
};

std::string parse_bare_key(Cursor& c) {
    c.skip_ws();
    size_t start = c.pos;
    while (c.pos < c.s.size() &&
           (std::isalnum(static_cast<unsigned char>(c.s[c.pos])) || c.s[c.pos] == '_' ||
            c.s[c.pos] == '-'))
        ++c.pos;
    if (c.pos == start) fail(c.line, "expected a key");
    return c.s.substr(start, c.pos - start);
}

std::string parse_string(Cursor& c) {
    if (c.peek() != '"') fail(c.line, "expected '\"'");
    ++c.pos;
    std::string out;
    while (c.pos < c.s.size() && c.s[c.pos] != '"') {
        char ch = c.s[c.pos];
        if (ch == '\\') {
            ++c.pos;
            if (c.pos >= c.s.size()) fail(c.line, "unterminated escape");
            switch (c.s[c.pos]) {
                case 'n': ch = '\n'; break;
                case 't': ch = '\t'; break;
                case '"': ch = '"'; break;
                case '\\': ch = '\\'; break;
                default: fail(c.line, "unsupported escape sequence");
            }
        }
        out.push_back(ch);
        ++c.pos;
    }
    if (c.pos >= c.s.size()) fail(c.line, "unterminated string");
    ++c.pos;
    return out;
}

TomlValue parse_value(Cursor& c);

TomlValue parse_scalar(Cursor& c) {
    c.skip_ws();
    const char ch = c.peek();
    TomlValue v;
    if (ch == '"') {
        v.data = parse_string(c);
        return v;
    }
    size_t start = c.pos;
    while (c.pos < c.s.size() && c.s[c.pos] != ',' && c.s[c.pos] != ']' && c.s[c.pos] != '#' &&
           c.s[c.pos] != ' ' && c.s[c.pos] != '\t')
        ++c.pos;
    std::string tok = c.s.substr(start, c.pos - start);
    if (tok.empty()) fail(c.line, "expected a value");
    if (tok == "true") {
        v.data = true;
        return v;
    }
    if (tok == "false") {
        v.data = false;
        return v;
    }
    const bool looks_float = tok.find_first_of(".eE") != std::string::npos;
    char* end = nullptr;
    if (!looks_float) {
        const long long i = std::strtoll(tok.c_str(), &end, 10);
        if (end == tok.c_str() + tok.size()) {
            v.data = static_cast<int64_t>(i);
            return v;
        }
    }
    const double d = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) fail(c.line, "cannot parse value '" + tok + "'");
    v.data = d;
    return v;
}

TomlValue parse_value(Cursor& c) {
    c.skip_ws();
    if (c.peek() != '[') return parse_scalar(c);
    ++c.pos;
    TomlValue v;
    TomlValue::Array arr;
    c.skip_ws();
    if (c.peek() == ']') {
        ++c.pos;
        v.data = std::move(arr);
        return v;
    }
    for (;;) {
        arr.push_back(parse_value(c));
        c.skip_ws();
        if (c.peek() == ',') {
            ++c.pos;
            continue;
        }
        if (c.peek() == ']') {
            ++c.pos;
            break;
        }
        fail(c.line, "expected ',' or ']' in array");
    }
    v.data = std::move(arr);
    return v;
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

std::vector<std::string> split_dotted(Cursor& c) {
    std::vector<std::string> path;
    for (;;) {
        path.push_back(parse_bare_key(c));
        c.skip_ws();
        if (c.peek() == '.') {
            ++c.pos;
            continue;
        }
        break;
    }
    return path;
}

TomlTable* descend(TomlTable* root, const std::vector<std::string>& path, size_t upto) {
    TomlTable* t = root;
    for (size_t i = 0; i < upto; ++i) t = &t->tables[path[i]];
    return t;
}

}  // namespace

const std::string& TomlValue::as_string() const {
    if (!is_string()) throw TomlError("expected a string value");
    return std::get<std::string>(data);
}

double TomlValue::as_double() const {
    if (data.index() == 1) return static_cast<double>(std::get<int64_t>(data));
    if (data.index() == 2) return std::get<double>(data);
    throw TomlError("expected a numeric value");
}

int64_t TomlValue::as_int() const {
    if (data.index() == 1) return std::get<int64_t>(data);
    throw TomlError("expected an integer value");
}

bool TomlValue::as_bool() const {
    if (!is_bool()) throw TomlError("expected a boolean value");
    return std::get<bool>(data);
}

const TomlValue::Array& TomlValue::as_array() const {
    if (!is_array()) throw TomlError("expected an array value");
    return std::get<Array>(data);
}

std::vector<double> TomlValue::as_double_array() const {
    std::vector<double> out;
    for (const TomlValue& v : as_array()) out.push_back(v.as_double());
    return out;
}

const TomlValue& TomlTable::at(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw TomlError("missing required key '" + key + "'");
    return it->second;
}

const TomlTable* TomlTable::table(const std::string& key) const {
    auto it = tables.find(key);
    return it == tables.end() ? nullptr : &it->second;
}

const std::vector<TomlTable>* TomlTable::array(const std::string& key) const {
    auto it = table_arrays.find(key);
    return it == table_arrays.end() ? nullptr : &it->second;
}

double TomlTable::number_or(const std::string& key, double fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second.as_double();
}

int64_t TomlTable::int_or(const std::string& key, int64_t fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second.as_int();
}

bool TomlTable::bool_or(const std::string& key, bool fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second.as_bool();
}

std::string TomlTable::string_or(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second.as_string();
}

TomlTable parse_toml(const std::string& text) {
    TomlTable root;
    TomlTable* current = &root;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = strip_comment(raw);
        Cursor c{line, 0, line_no};
        if (c.done()) continue;

        if (c.peek() == '[') {
            ++c.pos;
            const bool is_array = c.peek() == '[';
            if (is_array) ++c.pos;
            const auto path = split_dotted(c);
            c.skip_ws();
            if (c.peek() != ']') fail(line_no, "expected ']' in table header");
            ++c.pos;
            if (is_array) {
                if (c.peek() != ']') fail(line_no, "expected ']]' in array-of-tables header");
                ++c.pos;
            }
            if (!c.done()) fail(line_no, "trailing input after table header");
            TomlTable* parent = descend(&root, path, path.size() - 1);
            if (is_array) {
                parent->table_arrays[path.back()].emplace_back();
                current = &parent->table_arrays[path.back()].back();
            } else {
                current = &parent->tables[path.back()];
            }
            continue;
        }

        const std::string key = parse_bare_key(c);
        c.skip_ws();
        if (c.peek() != '=') fail(line_no, "expected '=' after key '" + key + "'");
        ++c.pos;
        TomlValue value = parse_value(c);
        if (!c.done()) fail(line_no, "trailing input after value for '" + key + "'");
        if (current->values.count(key)) fail(line_no, "duplicate key '" + key + "'");
        current->values[key] = std::move(value);
    }
    return root;
}

TomlTable parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw TomlError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_toml(buf.str());
}

}  // namespace kbm
