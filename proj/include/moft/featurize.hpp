#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "moft/tensor.hpp"

namespace moft {

inline constexpr std::size_t kFeatureChannels = 64;
inline constexpr std::size_t kPatchSize = 3;

struct FeatureModelConfig {
    std::size_t channels = kFeatureChannels;
    std::size_t patch = kPatchSize;
    // Box window (side) over which motion energy is pooled.
    std::size_t motion_window = 7;
    double motion_gain = 0.5;
    // Std of the small motion weights on non-motion channels.
    double motion_leak = 0.01;
    // Appearance weights on dedicated motion channels are damped by this factor.
    double motion_channel_appearance = 0.05;
    double energy_floor = 1e-3;
};

/// Horizontal / vertical motion-energy responses of every frame and location.
struct MotionResponse {
    Tensor4 mx; // F x H x W x 1
    Tensor4 my;
};

/// Toy stand-in for an intermediate block of a video denoiser.
///
/// Every output channel is the sum of two paths:
///  * appearance: the k x k latent patch around each location (clamped at
///    the borders) times a seeded random projection; linear and per-frame.
///  * motion: a gradient-constraint energy. With zbar the temporal mean of the
///    latent video and g = (d/dx zbar, d/dy zbar), each frame's residual
///    r_k = z_k - zbar gives n_k = -<r_k, g>, pooled over a box window and
///    divided by the pooled gradient energy. For a pan this is approximately
///    the frame's displacement relative to the clip mean (in pixels, scaled
///    by the local gradient anisotropy). A handful of seeded channels carry it
///    with large weights; every other channel only leaks it weakly.
///
/// The motion path is bilinear-over-rational in z and vanishes on static
/// videos, so static input still yields identical feature frames.
class FeatureModel {
public:
    FeatureModel(std::size_t latent_channels, std::uint64_t seed, FeatureModelConfig config = {});

    const FeatureModelConfig& config() const { return config_; }
    std::size_t latent_channels() const { return latent_channels_; }
    std::size_t channels() const { return config_.channels; }
    std::size_t patch_inputs() const { return config_.patch * config_.patch * latent_channels_; }

    Tensor4 forward(const Tensor4& z) const;
    Tensor4 appearance(const Tensor4& z) const;
    MotionResponse motion(const Tensor4& z) const;

    /// Vector-Jacobian product: gradient w.r.t. z of <grad_features, forward(z)>.
    Tensor4 backward(const Tensor4& z, const Tensor4& grad_features) const;

    /// Appearance weight of output channel `out` on flattened patch input `in`
    /// (input order: patch row, patch column, latent channel).
    double projection(std::size_t out, std::size_t in) const { return projection_[out * patch_inputs() + in]; }
    /// Motion weight of output channel `out` on axis 0 (x) or 1 (y).
    double motion_weight(std::size_t out, std::size_t axis) const { return motion_weights_[out][axis]; }
    const std::vector<std::size_t>& motion_channels() const { return motion_channels_; }

private:
    void check_input(const Tensor4& z) const;

    FeatureModelConfig config_;
    std::size_t latent_channels_;
    std::vector<double> projection_;                 // channels x patch_inputs
    std::vector<std::array<double, 2>> motion_weights_;
    std::vector<std::size_t> motion_channels_;
};

/// Features of a latent video with the default model for `seed` (D = 64).
FeatureTensor featurize(const LatentVideo& z, std::uint64_t seed);
FeatureTensor featurize(const Tensor4& z, std::uint64_t seed);

/// 3x3 box blur with clamped borders, per frame and channel.
Tensor4 box_blur3(const Tensor4& z);

} // namespace moft
