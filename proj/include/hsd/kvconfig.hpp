#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hsd {

// Flat "key = value" configuration. '#' starts a comment line; keys may be
// dotted ("model.hidden"). Later assignments to the same key win.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text);
    static KeyValueConfig read_file(const std::filesystem::path& path);

    void set(std::string key, std::string value);
    [[nodiscard]] bool contains(std::string_view key) const;
    [[nodiscard]] std::optional<std::string> get(std::string_view key) const;

    [[nodiscard]] std::string get_string(std::string_view key, std::string fallback) const;
    [[nodiscard]] std::string require_string(std::string_view key) const;
    [[nodiscard]] long long get_int(std::string_view key, long long fallback) const;
    [[nodiscard]] double get_double(std::string_view key, double fallback) const;
    [[nodiscard]] bool get_bool(std::string_view key, bool fallback) const;
    // Comma-separated list, entries trimmed, empty entries dropped.
    [[nodiscard]] std::vector<std::string> get_list(std::string_view key) const;

    [[nodiscard]] const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

    // Sorted "key = value" lines; parse(serialize()) reproduces the entries.
    [[nodiscard]] std::string serialize() const;
    void write_file(const std::filesystem::path& path) const;

private:
    std::map<std::string, std::string, std::less<>> entries_;
};

std::string trim(std::string_view s);

}  // namespace hsd
