#include "moft/profile.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "moft/io.hpp"

namespace moft {
namespace {

double parse_number(const std::string& tok, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError("profile: bad " + what + " '" + tok + "'");
    }
}

// Shortest text that reads back to the same double; -0 prints as 0.
std::string num(double v) {
    if (v == 0.0) v = 0.0;
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace

bool MotionChannelProfile::has_statistics() const {
    const std::size_t n = channels.size();
    return n > 0 && stat_min.size() == n && stat_max.size() == n && axis.size() == n && excursion > 0.0;
}

std::size_t retained_count(double fraction, std::size_t channels) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("retained fraction must lie in (0, 1]");
    const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(channels)));
    return std::clamp<std::size_t>(n, 1, channels);
}

std::string MotionChannelProfile::to_text() const {
    std::string out = "D=" + std::to_string(feature_channels) + " q=" + num(fraction) + " excursion=" + num(excursion) + '\n';
    for (std::size_t i = 0; i < channels.size(); ++i) {
        out += std::to_string(channels[i]) + ' ' + num(i < loading.size() ? loading[i] : 0.0) + ' ' +
               num(i < stat_min.size() ? stat_min[i] : 0.0) + ' ' + num(i < stat_max.size() ? stat_max[i] : 0.0);
        if (i < axis.size()) out += ' ' + num(axis[i].dx) + ' ' + num(axis[i].dy);
        out += '\n';
    }
    return out;
}

MotionChannelProfile MotionChannelProfile::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header)) throw FormatError("profile: empty file");
    MotionChannelProfile p;
    bool have_d = false, have_q = false;
    std::istringstream hs(header);
    for (std::string tok; hs >> tok;) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw FormatError("profile: bad header token '" + tok + "'");
        const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
        if (key == "D") {
            p.feature_channels = static_cast<std::size_t>(parse_number(value, "D"));
            have_d = true;
        } else if (key == "q") {
            p.fraction = parse_number(value, "q");
            have_q = true;
        } else if (key == "excursion") {
            p.excursion = parse_number(value, "excursion");
        } else {
            throw FormatError("profile: unknown header key '" + key + "'");
        }
    }
    if (!have_d || !have_q) throw FormatError("profile: header must start with D=<int> q=<float>");
    bool with_axis = true;
    for (std::string line; std::getline(in, line);) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::vector<std::string> toks;
        for (std::string t; ls >> t;) toks.push_back(t);
        if (toks.size() != 4 && toks.size() != 6) throw FormatError("profile: bad channel line '" + line + "'");
        const double idx = parse_number(toks[0], "channel index");
        if (idx < 0 || idx != std::floor(idx)) throw FormatError("profile: bad channel index " + toks[0]);
        p.channels.push_back(static_cast<std::size_t>(idx));
        p.loading.push_back(parse_number(toks[1], "loading"));
        p.stat_min.push_back(parse_number(toks[2], "statMin"));
        p.stat_max.push_back(parse_number(toks[3], "statMax"));
        if (p.stat_min.back() > p.stat_max.back()) throw FormatError("profile: statMin exceeds statMax");
        if (toks.size() == 6)
            p.axis.push_back({parse_number(toks[4], "axis"), parse_number(toks[5], "axis")});
        else
            with_axis = false;
    }
    if (!with_axis) p.axis.clear();
    if (p.channels.empty()) throw FormatError("profile: no channels");
    return p;
}

std::string MotionChannelProfile::id() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : to_text()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

MotionChannelProfile load_profile(const std::filesystem::path& path) {
    return MotionChannelProfile::from_text(read_text(path));
}

void save_profile(const MotionChannelProfile& profile, const std::filesystem::path& path) {
    write_text(path, profile.to_text());
}

} // namespace moft
