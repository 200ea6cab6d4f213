#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace dgs {

/// Flat `section.key = value` configuration with a fixed key set. Every key
/// has a default; unknown keys are rejected on load and on set.
class Config {
public:
    Config();

    void set(const std::string &key, const std::string &value);
    const std::string &get(const std::string &key) const;
    bool has(const std::string &key) const;

    double get_double(const std::string &key) const;
    long long get_int(const std::string &key) const;
    bool get_bool(const std::string &key) const;

    // Parses `key = value` lines; '#' starts a comment. Errors name the line.
    void load_text(const std::string &text, const std::string &origin = "<string>");
    void load_file(const std::filesystem::path &path);
    // `key=value` override as given on the command line.
    void apply_override(const std::string &assignment);

    // All keys in declaration order, one `key = value` per line.
    std::string dump() const;
    const std::vector<std::pair<std::string, std::string>> &entries() const { return entries_; }

    static std::vector<std::string> known_keys();

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace dgs
