#include "hsd/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hsd/error.hpp"

namespace hsd {

std::string trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
    KeyValueConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
        cfg.set(std::move(key), trim(std::string_view(t).substr(eq + 1)));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void KeyValueConfig::set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }

bool KeyValueConfig::contains(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_string(std::string_view key, std::string fallback) const {
    auto v = get(key);
    return v ? *v : std::move(fallback);
}

std::string KeyValueConfig::require_string(std::string_view key) const {
    auto v = get(key);
    if (!v || v->empty()) throw ValidationError("missing required config key: " + std::string(key));
    return *v;
}

long long KeyValueConfig::get_int(std::string_view key, long long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size()) {
        throw ValidationError("config key " + std::string(key) + ": not an integer: " + *v);
    }
    return out;
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    double out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size()) {
        throw ValidationError("config key " + std::string(key) + ": not a number: " + *v);
    }
    return out;
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "on" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "off" || *v == "no") return false;
    throw ValidationError("config key " + std::string(key) + ": not a boolean: " + *v);
}

std::vector<std::string> KeyValueConfig::get_list(std::string_view key) const {
    std::vector<std::string> out;
    auto v = get(key);
    if (!v) return out;
    std::string_view rest = *v;
    while (!rest.empty()) {
        auto comma = rest.find(',');
        std::string item = trim(rest.substr(0, comma));
        if (!item.empty()) out.push_back(std::move(item));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return out;
}

std::string KeyValueConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

void KeyValueConfig::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write config file: " + path.string());
    out << serialize();
}

}  // namespace hsd
