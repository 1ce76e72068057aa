#include "faceswap/config.hpp"

#include <fstream>
#include <sstream>

#include "faceswap/errors.hpp"

namespace faceswap {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            cfg.sections_[section];
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        cfg.sections_[section][key] = trim(s.substr(eq + 1));
    }
    return cfg;
}

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
    size_t dot = dotted_key.find('.');
    std::string section = dot == std::string::npos ? "" : dotted_key.substr(0, dot);
    std::string key = dot == std::string::npos ? dotted_key : dotted_key.substr(dot + 1);
    if (key.empty()) throw ConfigError("empty config key in override '" + dotted_key + "'");
    sections_[section][key] = value;
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key);
}

std::string RunConfig::get_str(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

int64_t RunConfig::get_int(const std::string& section, const std::string& key, int64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = get_str(section, key, "");
    try {
        size_t pos = 0;
        int64_t r = std::stoll(v, &pos, 0);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config " + section + "." + key + ": '" + v + "' is not an integer");
    }
}

double RunConfig::get_real(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = get_str(section, key, "");
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config " + section + "." + key + ": '" + v + "' is not a number");
    }
}

bool RunConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get_str(section, key, "");
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config " + section + "." + key + ": '" + v + "' is not a boolean");
}

std::string RunConfig::dump() const {
    std::ostringstream os;
    for (const auto& [section, kv] : sections_) {
        if (!section.empty()) os << '[' << section << "]\n";
        for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
        os << '\n';
    }
    return os.str();
}

std::string RunConfig::fingerprint() const {
    // FNV-1a over the resolved text; stable across runs and platforms
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

void RunConfig::write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write resolved config to " + path);
    f << dump();
}

}  // namespace faceswap
