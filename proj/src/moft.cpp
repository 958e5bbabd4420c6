#include "moft/moft.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "moft/io.hpp"

namespace moft {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& s, const std::string& context) {
    try {
        std::size_t used = 0;
        const double v = std::stod(trim(s), &used);
        if (used != trim(s).size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("bad number '" + s + "' in " + context);
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

Displacement named_direction(const std::string& name) {
    if (name == "right") return {1.0, 0.0};
    if (name == "left") return {-1.0, 0.0};
    if (name == "down") return {0.0, 1.0};
    if (name == "up") return {0.0, -1.0};
    if (name == "static" || name == "still") return {0.0, 0.0};
    throw ArgumentError("unknown direction '" + name + "'");
}

} // namespace

FeatureTensor content_removal(const FeatureTensor& t) {
    const Tensor4 mean = frame_mean(t);
    Tensor4 out(t.shape());
    auto mv = mean.values();
    auto tv = t.values();
    auto ov = out.values();
    const std::size_t n = t.shape().frame_size();
    for (std::size_t f = 0; f < t.frames(); ++f)
        for (std::size_t i = 0; i < n; ++i) ov[f * n + i] = tv[f * n + i] - mv[i];
    return out;
}

Moft extract_moft(const FeatureTensor& t, const MotionChannelProfile& profile) {
    if (profile.channels.empty()) throw ProfileMismatchError("profile has no channels");
    for (std::size_t c : profile.channels)
        if (c >= t.channels())
            throw ProfileMismatchError("profile channel " + std::to_string(c) + " out of range for D=" +
                                       std::to_string(t.channels()));
    if (profile.feature_channels != 0 && profile.feature_channels != t.channels())
        throw ProfileMismatchError("profile calibrated for D=" + std::to_string(profile.feature_channels) +
                                   ", features have D=" + std::to_string(t.channels()));
    const FeatureTensor norm = content_removal(t);
    const std::size_t K = profile.channels.size();
    Moft m{Tensor4(Shape{t.frames(), t.height(), t.width(), K}), profile.channels, profile.id()};
    for (std::size_t f = 0; f < t.frames(); ++f)
        for (std::size_t r = 0; r < t.height(); ++r)
            for (std::size_t c = 0; c < t.width(); ++c) {
                auto src = norm.pixel(f, r, c);
                auto dst = m.values.pixel(f, r, c);
                for (std::size_t k = 0; k < K; ++k) dst[k] = src[profile.channels[k]];
            }
    return m;
}

Moft extract_reference_moft(const FeatureTensor& ref_features, const MotionChannelProfile& profile) {
    return extract_moft(ref_features, profile);
}

Moft synthesize_reference_moft(const DirectionSchedule& schedule, const MotionChannelProfile& profile,
                               std::size_t frames, std::size_t height, std::size_t width) {
    if (!profile.has_statistics()) throw CalibrationMissingError("profile lacks calibration statistics");
    if (frames == 0 || height == 0 || width == 0) throw ArgumentError("reference shape must be >= 1");
    if (schedule.steps.size() + 1 != frames)
        throw ArgumentError("schedule has " + std::to_string(schedule.steps.size()) + " steps, expected " +
                            std::to_string(frames - 1));
    for (const auto& s : schedule.steps)
        if (!std::isfinite(s.dx) || !std::isfinite(s.dy)) throw ArgumentError("schedule entries must be finite");

    const std::size_t K = profile.size();
    Moft m{Tensor4(Shape{frames, height, width, K}), profile.channels, profile.id()};
    std::vector<double> drive(frames), value(frames);
    for (std::size_t k = 0; k < K; ++k) {
        const Displacement a = profile.axis[k];
        drive[0] = 0.0;
        for (std::size_t f = 1; f < frames; ++f)
            drive[f] = drive[f - 1] + schedule.steps[f - 1].dx * a.dx + schedule.steps[f - 1].dy * a.dy;
        double mean = 0.0;
        for (double d : drive) mean += d;
        mean /= static_cast<double>(frames);
        const double lo = profile.stat_min[k], hi = profile.stat_max[k];
        const double e = profile.excursion;
        double vmean = 0.0;
        for (std::size_t f = 0; f < frames; ++f) {
            const double u = (drive[f] - mean + e) / (2.0 * e);
            value[f] = std::clamp(lo + u * (hi - lo), lo, hi);
            vmean += value[f];
        }
        vmean /= static_cast<double>(frames);
        for (std::size_t f = 0; f < frames; ++f) {
            const double v = value[f] - vmean;
            for (std::size_t r = 0; r < height; ++r)
                for (std::size_t c = 0; c < width; ++c) m.values.at(f, r, c, k) = v;
        }
    }
    return m;
}

DirectionSchedule parse_schedule(const std::string& text, double speed) {
    const std::string body = trim(text);
    if (body.empty()) throw ArgumentError("empty direction schedule");
    DirectionSchedule out;
    const bool numeric = body.find_first_of("0123456789.-+") == 0;
    if (numeric) {
        for (const auto& item : split(body, ';')) {
            const auto parts = split(trim(item), ',');
            if (parts.size() != 2) throw ArgumentError("schedule entry '" + item + "' is not dx,dy");
            out.steps.push_back({to_double(parts[0], "schedule"), to_double(parts[1], "schedule")});
        }
        return out;
    }
    // Shorthand: name[@speed][×|x|*count], comma separated.
    for (std::string item : split(body, ',')) {
        item = trim(item);
        if (item.empty()) throw ArgumentError("empty schedule item");
        std::size_t count = 1;
        std::string head = item;
        const std::string times = "\xC3\x97";
        std::size_t pos = item.find(times);
        std::size_t skip = times.size();
        if (pos == std::string::npos) {
            pos = item.find_first_of("x*", 1);
            skip = 1;
            // "x" only counts as a separator when digits follow.
            while (pos != std::string::npos &&
                   (pos + 1 >= item.size() || item.find_first_not_of("0123456789", pos + 1) != std::string::npos))
                pos = item.find_first_of("x*", pos + 1);
        }
        if (pos != std::string::npos) {
            head = item.substr(0, pos);
            const double n = to_double(item.substr(pos + skip), "schedule count");
            if (n < 1 || n != std::floor(n)) throw ArgumentError("schedule count must be a positive integer");
            count = static_cast<std::size_t>(n);
        }
        double s = speed;
        if (const auto at = head.find('@'); at != std::string::npos) {
            s = to_double(head.substr(at + 1), "schedule speed");
            head = head.substr(0, at);
        }
        const Displacement d = named_direction(trim(head));
        for (std::size_t i = 0; i < count; ++i) out.steps.push_back({d.dx * s, d.dy * s});
    }
    return out;
}

std::string format_schedule(const DirectionSchedule& schedule) {
    auto num = [](double v) {
        char buf[32];
        return std::string(buf, std::to_chars(buf, buf + sizeof buf, v == 0.0 ? 0.0 : v).ptr);
    };
    std::string out;
    for (std::size_t i = 0; i < schedule.steps.size(); ++i) {
        if (i) out += ';';
        out += num(schedule.steps[i].dx) + ',' + num(schedule.steps[i].dy);
    }
    return out;
}

void save_moft(const Moft& m, const std::filesystem::path& path) {
    if (m.channels.size() != m.values.channels())
        throw ShapeError("moft channel list does not match tensor channels");
    save_tensor(m.values, path);
    std::ostringstream os;
    os << "profile=" << m.profile_id << " channels=";
    for (std::size_t i = 0; i < m.channels.size(); ++i) os << (i ? "," : "") << m.channels[i];
    os << '\n';
    write_text(path.string() + ".txt", os.str());
}

Moft load_moft(const std::filesystem::path& path) {
    Moft m;
    m.values = load_tensor(path);
    const std::string side = read_text(path.string() + ".txt");
    std::istringstream in(side);
    bool have_channels = false;
    for (std::string tok; in >> tok;) {
        if (tok.rfind("profile=", 0) == 0) {
            m.profile_id = tok.substr(8);
        } else if (tok.rfind("channels=", 0) == 0) {
            for (const auto& c : split(tok.substr(9), ',')) {
                const double v = to_double(c, "moft sidecar");
                if (v < 0 || v != std::floor(v)) throw FormatError("moft sidecar: bad channel '" + c + "'");
                m.channels.push_back(static_cast<std::size_t>(v));
            }
            have_channels = true;
        } else {
            throw FormatError("moft sidecar: unknown token '" + tok + "'");
        }
    }
    if (!have_channels || m.channels.size() != m.values.channels())
        throw FormatError("moft sidecar channel list does not match tensor");
    return m;
}

} // namespace moft
