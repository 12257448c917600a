#include "rml/config.hpp"

#include "rml/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace rml::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

template <typename T>
bool parse_full(const std::string& s, T& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

std::string join_numbers(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + report::format_number(v[i]);
    return s;
}

std::string join_integers(const std::vector<std::int64_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in, const std::string& source) {
    ConfigFile cfg;
    cfg.source_ = source;
    std::string line, section;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string at = source + ":" + std::to_string(number) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(at + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(at + "empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(at + "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(at + "missing key before '='");
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.entries_.count(full))
            throw ConfigError(at + "duplicate key '" + full + "' (first set on line " +
                              std::to_string(cfg.entries_[full].line) + ")");
        cfg.entries_[full] = Entry{value, number};
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path.string());
    return parse(f, path.string());
}

void ConfigFile::set(const std::string& key, const std::string& value) { entries_[key] = Entry{value, 0}; }

std::string ConfigFile::where(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end() || it->second.line == 0) return source_ + ": ";
    return source_ + ":" + std::to_string(it->second.line) + ": ";
}

const ConfigFile::Entry& ConfigFile::entry(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(source_ + ": missing required field '" + key + "'");
    it->second.used = true;
    return it->second;
}

void ConfigFile::bad_value(const std::string& key, const std::string& expected) const {
    throw ConfigError(where(key) + "field '" + key + "' must be " + expected + ", got '" + entries_.at(key).value +
                      "'");
}

std::string ConfigFile::text(const std::string& key) const {
    const auto& e = entry(key);
    if (e.value.empty()) bad_value(key, "non-empty");
    return e.value;
}

std::string ConfigFile::text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) {
        defaults_[key] = fallback;
        return fallback;
    }
    return text(key);
}

double ConfigFile::number(const std::string& key, double fallback) const {
    if (!has(key)) {
        defaults_[key] = report::format_number(fallback);
        return fallback;
    }
    double v = 0;
    if (!parse_full(entry(key).value, v)) bad_value(key, "a number");
    return v;
}

std::int64_t ConfigFile::integer(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) {
        defaults_[key] = std::to_string(fallback);
        return fallback;
    }
    std::int64_t v = 0;
    if (!parse_full(entry(key).value, v)) bad_value(key, "an integer");
    return v;
}

std::uint64_t ConfigFile::seed(const std::string& key) const {
    std::uint64_t v = 0;
    if (!parse_full(entry(key).value, v)) bad_value(key, "a non-negative integer");
    return v;
}

bool ConfigFile::flag(const std::string& key, bool fallback) const {
    if (!has(key)) {
        defaults_[key] = fallback ? "true" : "false";
        return fallback;
    }
    const auto& v = entry(key).value;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, "true or false");
}

std::vector<std::int64_t> ConfigFile::integers(const std::string& key, std::vector<std::int64_t> fallback) const {
    if (!has(key)) {
        defaults_[key] = join_integers(fallback);
        return fallback;
    }
    std::vector<std::int64_t> out;
    for (const auto& item : split_list(entry(key).value)) {
        std::int64_t v = 0;
        if (!parse_full(item, v)) bad_value(key, "a comma-separated list of integers");
        out.push_back(v);
    }
    return out;
}

std::vector<double> ConfigFile::numbers(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) {
        defaults_[key] = join_numbers(fallback);
        return fallback;
    }
    std::vector<double> out;
    for (const auto& item : split_list(entry(key).value)) {
        double v = 0;
        if (!parse_full(item, v)) bad_value(key, "a comma-separated list of numbers");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> ConfigFile::unused() const {
    std::vector<std::pair<int, std::string>> keys;
    for (const auto& [k, e] : entries_)
        if (!e.used) keys.emplace_back(e.line, k);
    std::sort(keys.begin(), keys.end());
    std::vector<std::string> out;
    for (auto& [line, k] : keys) out.push_back(std::move(k));
    return out;
}

std::string ConfigFile::echo() const {
    std::map<std::string, std::string> all(defaults_.begin(), defaults_.end());
    for (const auto& [k, e] : entries_) all[k] = e.value;
    std::string out;
    for (const auto& [k, v] : all) out += k + " = " + v + "\n";
    return out;
}

}  // namespace rml::config
