#ifndef FACESWAP_CONFIG_HPP
#define FACESWAP_CONFIG_HPP

#include <map>
#include <string>

namespace faceswap {

// Flat INI-style configuration: [section] headers, key = value lines,
// '#'/';' comments. CLI overrides use dotted keys ("train.total_steps").
class RunConfig {
public:
    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text);

    // dotted "section.key" (keys without a dot land in the "" section)
    void set(const std::string& dotted_key, const std::string& value);
    bool has(const std::string& section, const std::string& key) const;

    std::string get_str(const std::string& section, const std::string& key,
                        const std::string& fallback) const;
    int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const;
    double get_real(const std::string& section, const std::string& key, double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    std::string dump() const;         // resolved INI text
    std::string fingerprint() const;  // stable hex hash of the resolved text
    void write_file(const std::string& path) const;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace faceswap

#endif
