#pragma once

// Flat "key = value" files with [section] headers. Keys are addressed as
// "section.key"; keys before the first header have no prefix. '#' starts a
// comment. Every lookup marks the key used so leftovers can be reported.

#include "rml/common.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace rml::config {

class ConfigFile {
public:
    static ConfigFile parse(std::istream& in, const std::string& source);
    static ConfigFile load(const std::filesystem::path& path);

    const std::string& source() const { return source_; }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    // Command-line overrides replace or add entries (line 0).
    void set(const std::string& key, const std::string& value);

    std::string text(const std::string& key) const;  // required
    std::string text(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& key, std::int64_t fallback) const;
    std::uint64_t seed(const std::string& key) const;  // required, non-negative
    bool flag(const std::string& key, bool fallback) const;
    std::vector<std::int64_t> integers(const std::string& key, std::vector<std::int64_t> fallback) const;
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;

    // Keys never looked up, in file order.
    std::vector<std::string> unused() const;
    // "source:line: " prefix for diagnostics about key.
    std::string where(const std::string& key) const;
    // Resolved key = value listing, sorted by key.
    std::string echo() const;

private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };
    const Entry& entry(const std::string& key) const;
    [[noreturn]] void bad_value(const std::string& key, const std::string& expected) const;

    std::string source_;
    std::map<std::string, Entry> entries_;
    // Lookups of absent keys that fell back to defaults, for echo().
    mutable std::map<std::string, std::string> defaults_;
};

}  // namespace rml::config
