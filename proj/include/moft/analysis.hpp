#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moft/moft.hpp"
#include "moft/profile.hpp"
#include "moft/synth.hpp"
#include "moft/tensor.hpp"

namespace moft {

using Vector = std::vector<double>;

struct PcaModel {
    Vector mean;
    std::vector<Vector> components; // unit vectors, descending variance
    Vector explained_variance;

    std::size_t dimension() const { return mean.size(); }
};

/// Mean-centered covariance eigendecomposition. Each component's
/// largest-magnitude entry is made positive.
PcaModel fit_pca(const std::vector<Vector>& samples, std::size_t num_components);

Vector project(const PcaModel& model, const Vector& sample, std::size_t k);
Vector reconstruct(const PcaModel& model, const Vector& coords);

/// One D-vector per video: the spatial mean of frame 1, after content removal
/// when `normalized` is set. With `all_frames` every frame contributes its own
/// sample instead.
std::vector<Vector> pooled_samples(const std::vector<LabeledTensor>& set, bool normalized, bool all_frames = false);

/// Retains the top max(1, round(q*D)) channels by |first-component loading|
/// (ties by ascending index). statMin/statMax are the extrema of the spatially
/// pooled, content-removed traces over every calibration video and frame.
MotionChannelProfile rank_motion_channels(const PcaModel& model, const std::vector<FeatureTensor>& calibration,
                                          double q);

/// Fills the per-channel displacement axis and the drive excursion from the
/// labeled calibration set.
void calibrate_axes(MotionChannelProfile& profile, const std::vector<LabeledTensor>& set);

struct CalibrationOptions {
    double fraction = 0.04;
    std::size_t num_components = 2;
    bool all_frames = false;
};

/// fit_pca on pooled normalized first frames, rank_motion_channels, calibrate_axes.
MotionChannelProfile calibrate_profile(const std::vector<LabeledTensor>& set, const CalibrationOptions& opts,
                                       PcaModel* model_out = nullptr);

/// The F values of one channel at one location (t should be content-removed).
Vector channel_trace(const FeatureTensor& t, std::size_t channel, Point2 point);

/// Channel trace averaged over the mask's locations (all locations when the
/// mask is empty).
Vector region_trace(const FeatureTensor& t, std::size_t channel, const RegionMask* mask = nullptr);

/// Row-major H x W map.
struct Map2 {
    std::size_t height = 0;
    std::size_t width = 0;
    Vector values;

    double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
    Point2 argmax() const; // first maximum in row-major order
    double mean() const;
};

/// Raw cosine similarity between the flattened (frames x channels) vector of
/// `ref` at ref_point and every location of `target`. Zero target vectors
/// score 0.
Map2 cosine_map(const Tensor4& ref, Point2 ref_point, const Tensor4& target);

/// cosine_map min-max normalized to [0, 1]; a constant map becomes all ones.
Map2 similarity_heatmap(const Moft& ref, Point2 ref_point, const Moft& target);
Map2 normalize_map(Map2 m);

struct ProbeLevel {
    double sigma = 0.0;
    double moft_error = 0.0;    // pixels from argmax to the reference point
    double vanilla_error = 0.0;
};

/// Perturbs `video` with Gaussian noise of std sigma * (value range) per level,
/// re-featurizes, and localizes `ref_point` by cosine argmax against the
/// clean features, once with Moft and once with vanilla features.
std::vector<ProbeLevel> probe_noise_robustness(const LatentVideo& video, const std::vector<double>& noise_levels,
                                               const MotionChannelProfile& profile, std::uint64_t seed,
                                               Point2 ref_point, std::uint64_t feature_seed = 0);

/// Fraction of points assigned to their own class's centroid.
double nearest_centroid_accuracy(const std::vector<Vector>& points, const std::vector<std::string>& labels);

} // namespace moft
