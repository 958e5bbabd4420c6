#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace moft {

/// key=value settings. Every key has a default; unknown keys are rejected.
class RunConfig {
public:
    RunConfig();

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    bool has_key(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key) const;
    double get_double(const std::string& key) const;
    long long get_int(const std::string& key) const;
    std::uint64_t get_seed(const std::string& key) const;
    std::vector<std::size_t> get_index_list(const std::string& key) const;

    /// Fully resolved "key=value" lines in key order.
    std::string to_text() const;
    void echo(const std::filesystem::path& dir) const;

    static const std::map<std::string, std::string>& defaults();

private:
    std::map<std::string, std::string> values_;
};

} // namespace moft
