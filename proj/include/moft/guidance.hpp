#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "moft/featurize.hpp"
#include "moft/moft.hpp"
#include "moft/profile.hpp"
#include "moft/tensor.hpp"

namespace moft {

struct GuidanceConfig {
    int steps = 25;         // T; steps count down from T-1 to 0
    double lr = 10.0;       // eta
    int inner_iters = 1;
    int t1 = 19;
    int t2 = 18;
    int t3 = 5;
    double wc = 1.0;
    double wp = 0.01;
    std::vector<std::size_t> clip_frames = {0, 1, 2, 3, 4, 5, 6, 7}; // 0-based
    std::uint64_t seed = 0;  // feature model seed
    double denoise_blend = 0.1;

    /// Throws ConfigError unless T >= t1 > t2 > t3 >= 0, eta >= 0 and weights >= 0.
    void validate() const;
};

struct DragSpec {
    Point2 start;
    Point2 target;
    std::vector<Point2> trajectory; // F points, frame 1 = start

    static DragSpec linear(Point2 start, Point2 target, std::size_t frames);
};

/// Band of pixels within half_width (Chebyshev) of the start-target
/// bounding box, all frames.
RegionMask drag_region(const DragSpec& spec, std::size_t height, std::size_t width, std::size_t frames,
                       double half_width);

struct LossWeights {
    double wc = 0.0;
    double wp = 0.0;
    bool operator==(const LossWeights&) const = default;
};

/// Four-branch compositional schedule: MOFT only for t >= t1, both for
/// t1 > t >= t2, drag only for t2 > t >= t3, nothing below t3.
LossWeights loss_schedule(int t, const GuidanceConfig& cfg);

/// Schedule of a MOFT-only run (no drag): w^c for t >= t3, else 0.
LossWeights motion_only_schedule(int t, const GuidanceConfig& cfg);

/// Mean over masked locations of the L2 norm of the (frames x channels)
/// difference.
double motion_loss(const Moft& moft, const Moft& ref, const RegionMask& mask);

/// Sum over frames 2..F of the distance between the bilinearly sampled
/// feature at trajectory[i] and the (constant) frame-1 feature at the start.
double drag_loss(const FeatureTensor& features, const DragSpec& spec);

/// The frame-1 feature at the start point. The gradient of drag_loss treats
/// it as a constant, so finite differences must hold it fixed too.
std::vector<double> drag_anchor(const FeatureTensor& features, const DragSpec& spec);
double drag_loss(const FeatureTensor& features, const DragSpec& spec, const std::vector<double>& anchor);

/// Gradients w.r.t. the feature tensor.
FeatureTensor motion_loss_feature_grad(const FeatureTensor& features, const Moft& ref, const RegionMask& mask,
                                       const MotionChannelProfile& profile);
FeatureTensor drag_loss_feature_grad(const FeatureTensor& features, const DragSpec& spec);

/// Zero outside region x frame set. Exact.
Tensor4 masked_clip(const Tensor4& grad, const RegionMask& mask);

/// Loss values and gradients w.r.t. the latent video.
double motion_loss_at(const Tensor4& z, const Moft& ref, const RegionMask& mask, const MotionChannelProfile& profile,
                      const FeatureModel& model);
double drag_loss_at(const Tensor4& z, const DragSpec& spec, const FeatureModel& model);
double drag_loss_at(const Tensor4& z, const DragSpec& spec, const std::vector<double>& anchor,
                    const FeatureModel& model);
Tensor4 grad_motion_loss(const Tensor4& z, const Moft& ref, const RegionMask& mask,
                         const MotionChannelProfile& profile, const FeatureModel& model);
Tensor4 grad_drag_loss(const Tensor4& z, const DragSpec& spec, const FeatureModel& model);

struct StepLog {
    int step = 0;
    double wc = 0.0;
    double wp = 0.0;
    double motion = 0.0; // L^c before the step's update
    double drag = 0.0;   // L^p before the step's update (0 without drag)
};

struct GuidanceResult {
    LatentVideo z;
    std::vector<StepLog> log;
};

/// Called with the clipped update eta * g^clip of every inner iteration,
/// before it is applied.
using UpdateObserver = std::function<void(int step, int iter, const Tensor4& update)>;

/// Guidance loop over t = T-1 .. 0: features, losses, clipped gradient steps,
/// then the stand-in denoiser z <- (1-b) z + b blur3(z).
GuidanceResult run_guidance(const LatentVideo& z_init, const Moft& ref, const RegionMask& mask,
                            const std::optional<DragSpec>& drag, const GuidanceConfig& cfg,
                            const MotionChannelProfile& profile, const UpdateObserver& observer = {});

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

/// Central finite differences of L^c and L^p at `coords` random coordinates
/// of `points` seeded latent videos.
GradCheckResult gradient_check(std::uint64_t seed, std::size_t points = 10, std::size_t coords = 3, double h = 1e-3);

} // namespace moft
