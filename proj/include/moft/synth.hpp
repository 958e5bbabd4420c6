#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "moft/tensor.hpp"

namespace moft {

inline constexpr double kMaxStepDisplacement = 3.0;

struct MotionPattern {
    std::vector<Displacement> steps; // F-1 entries for an F-frame video
    std::string label;

    // Mean per-frame displacement; the axis a calibration class pans along.
    Displacement mean_step() const;
};

struct SceneSpec {
    std::uint64_t seed = 0;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t octaves = 3;
    std::size_t frames = 16;
    std::size_t latent_channels = 4;
};

/// Seeded periodic multi-octave value noise, one image per latent channel,
/// every value in [0, 1]. Layout: single frame H x W x C.
Tensor4 generate_base_image(const SceneSpec& scene);

/// Frame k is the base image translated by the cumulative displacement of
/// steps 1..k-1 (bilinear resampling, toroidal wrap).
LatentVideo generate_panning_video(const SceneSpec& scene, const MotionPattern& pattern);

/// Same construction from an explicit base image.
Tensor4 pan_image(const Tensor4& base, const MotionPattern& pattern);

/// Constant pan: `frames - 1` copies of `step`.
MotionPattern constant_pattern(Displacement step, std::size_t frames, std::string label = "");

/// Named calibration directions at the given speed: right, left, up, down,
/// up-then-down, down-then-up, right-then-left, left-then-right, static.
MotionPattern named_pattern(const std::string& name, std::size_t frames, double speed);

struct LabeledTensor {
    FeatureTensor features;
    std::string label;
    MotionPattern pattern;
    LatentVideo video;
};

/// scenesPerDirection independent scenes per pattern, featurized with
/// `feature_seed`; scene seeds derive from `seed`.
std::vector<LabeledTensor> build_calibration_set(const std::vector<MotionPattern>& directions,
                                                 std::size_t scenes_per_direction, std::uint64_t seed,
                                                 const SceneSpec& geometry = {}, std::uint64_t feature_seed = 0);

/// Horizontal warp video for the localization probe: every pixel oscillates
/// along x with an amplitude, phase and frequency that vary across the frame,
/// so each location has a distinct temporal motion profile.
LatentVideo generate_warp_video(const SceneSpec& scene, double amplitude);

/// Bilinear sample of channel `ch` of frame `f` at fractional (row, col) with
/// toroidal wrap.
double sample_wrapped(const Tensor4& t, std::size_t f, double row, double col, std::size_t ch);

} // namespace moft
