#pragma once
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace smuq {

/// Flat `key = value` text. Blank lines and lines starting with '#' are ignored;
/// a repeated key keeps its last value.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text);
    static KeyValueConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    /// Applies `key=value`; throws ErrorKind::config if there is no '='.
    void set_assignment(std::string_view assignment);
    void merge(const KeyValueConfig& overrides);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::string* find(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

    /// Sorted `key = value` lines.
    std::string to_text() const;

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace smuq
