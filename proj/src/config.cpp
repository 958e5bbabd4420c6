#include "moft/config.hpp"

#include <cmath>
#include <sstream>

#include "moft/error.hpp"
#include "moft/io.hpp"

namespace moft {

const std::map<std::string, std::string>& RunConfig::defaults() {
    static const std::map<std::string, std::string> d = {
        {"seed", "1"},
        {"feature_seed", "0"},
        {"frames", "16"},
        {"height", "32"},
        {"width", "32"},
        {"latent_channels", "4"},
        {"octaves", "3"},
        {"scenes", "8"},
        {"speed", "1"},
        {"directions", "right,left,down,up"},
        {"q", "0.04"},
        {"components", "2"},
        {"pca_all_frames", "0"},
        {"steps", "25"},
        {"lr", "10"},
        {"inner_iters", "1"},
        {"t1", "19"},
        {"t2", "18"},
        {"t3", "5"},
        {"wc", "1"},
        {"wp", "0.01"},
        {"clip_frames", "1-8"},
        {"denoise_blend", "0.1"},
        {"schedule_speed", "0.5"},
        {"drag_wc", "5"},
        {"drag_half_width", "2"},
    };
    return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        auto strip = [](std::string s) {
            const auto x = s.find_first_not_of(" \t\r");
            if (x == std::string::npos) return std::string();
            return s.substr(x, s.find_last_not_of(" \t\r") - x + 1);
        };
        cfg.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return parse(read_text(path)); }

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

std::string RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not a number: '" + v + "'");
    }
}

long long RunConfig::get_int(const std::string& key) const {
    const double d = get_double(key);
    if (d != std::floor(d)) throw ConfigError("config key '" + key + "' must be an integer");
    return static_cast<long long>(d);
}

std::uint64_t RunConfig::get_seed(const std::string& key) const {
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        const unsigned long long s = std::stoull(v, &used);
        // stoull quietly wraps a leading minus sign
        if (used != v.size() || v.find('-') != std::string::npos) throw std::invalid_argument(v);
        return s;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not an unsigned integer: '" + v + "'");
    }
}

std::vector<std::size_t> RunConfig::get_index_list(const std::string& key) const {
    // 1-based "a-b" ranges and single indices, comma separated; returned 0-based.
    std::vector<std::size_t> out;
    std::istringstream in(get(key));
    for (std::string item; std::getline(in, item, ',');) {
        if (item.empty()) continue;
        try {
            const auto dash = item.find('-');
            const unsigned long lo = std::stoul(item.substr(0, dash));
            const unsigned long hi = dash == std::string::npos ? lo : std::stoul(item.substr(dash + 1));
            if (lo == 0 || hi < lo) throw std::invalid_argument(item);
            for (unsigned long i = lo; i <= hi; ++i) out.push_back(i - 1);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': bad frame range '" + item + "'");
        }
    }
    return out;
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
    return os.str();
}

void RunConfig::echo(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.txt", to_text());
}

} // namespace moft
