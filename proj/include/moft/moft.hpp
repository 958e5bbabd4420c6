#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "moft/profile.hpp"
#include "moft/tensor.hpp"

namespace moft {

/// Extracted motion feature: content-removed features restricted to the
/// profile's channels, in profile order.
struct Moft {
    Tensor4 values; // F x H x W x |C|
    std::vector<std::size_t> channels;
    std::string profile_id;

    std::size_t frames() const { return values.frames(); }
    std::size_t height() const { return values.height(); }
    std::size_t width() const { return values.width(); }
    std::size_t size() const { return values.channels(); }
};

/// User's frame-wise motion request: F-1 displacements in pixels/frame.
struct DirectionSchedule {
    std::vector<Displacement> steps;
};

/// X - mean over frames, per location and channel.
FeatureTensor content_removal(const FeatureTensor& t);

Moft extract_moft(const FeatureTensor& t, const MotionChannelProfile& profile);

/// Reference motion from a reference video's features. Extracted once and
/// reused for every guidance step.
Moft extract_reference_moft(const FeatureTensor& ref_features, const MotionChannelProfile& profile);

/// Spatially uniform reference Moft for a direction schedule. Per channel the
/// cumulative drive along the channel axis is mapped linearly from
/// [-excursion, +excursion] onto [statMin, statMax], clamped, and centered so
/// every location sums to zero over frames. Each constant-direction stretch
/// of the schedule becomes one linear piece of the channel trace.
Moft synthesize_reference_moft(const DirectionSchedule& schedule, const MotionChannelProfile& profile,
                               std::size_t frames, std::size_t height, std::size_t width);

/// "dx1,dy1;dx2,dy2;..." or the shorthand "right×8,left×7" (also "x" or "*"
/// for ×, and "name@speed×count"). Named steps use `speed` pixels/frame.
DirectionSchedule parse_schedule(const std::string& text, double speed = 1.0);
std::string format_schedule(const DirectionSchedule& schedule);

/// Moft files are MFT1 tensors plus a sidecar "<path>.txt" holding
/// "profile=<id> channels=<c1,c2,...>".
void save_moft(const Moft& m, const std::filesystem::path& path);
Moft load_moft(const std::filesystem::path& path);

} // namespace moft
