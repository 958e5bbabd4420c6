#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "moft/tensor.hpp"

namespace moft {

/// Retained motion channels, ranked by |first principal loading|, with the
/// calibration statistics used to synthesize reference motion.
struct MotionChannelProfile {
    std::size_t feature_channels = 0; // D of the calibrated features
    double fraction = 0.0;            // retained fraction q
    std::vector<std::size_t> channels;
    std::vector<double> loading;
    std::vector<double> stat_min;
    std::vector<double> stat_max;
    // Unit displacement axis per channel; moving content along it raises the
    // channel's value.
    std::vector<Displacement> axis;
    // Largest centered cumulative displacement (pixels) seen in calibration;
    // a reference drive of +excursion maps to stat_max.
    double excursion = 0.0;

    std::size_t size() const { return channels.size(); }
    bool has_statistics() const;

    /// Stable identifier: hex FNV-1a digest of the serialized profile.
    std::string id() const;

    /// Line 1: "D=<int> q=<float> excursion=<float>"; then one line per
    /// channel: "index loading statMin statMax axisX axisY".
    std::string to_text() const;
    static MotionChannelProfile from_text(const std::string& text);
};

MotionChannelProfile load_profile(const std::filesystem::path& path);
void save_profile(const MotionChannelProfile& profile, const std::filesystem::path& path);

std::size_t retained_count(double fraction, std::size_t channels);

} // namespace moft
