#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "moft/tensor.hpp"

namespace moft {

struct Tracklet {
    std::vector<Point2> points; // one per frame; row = y, col = x
    std::vector<bool> flat;     // per step: the match window had zero variance

    std::size_t frames() const { return points.size(); }
    Displacement step(std::size_t k) const; // points[k+1] - points[k]
};

using TrackletSet = std::vector<Tracklet>;

struct TrackerConfig {
    std::size_t window = 5;
    int radius = 3;
};

/// NCC block matching frame to frame over all latent channels with toroidal
/// sampling, parabolic sub-pixel refinement, accumulated (unwrapped) positions.
TrackletSet track(const Tensor4& video, const std::vector<Point2>& seeds, const TrackerConfig& cfg = {});

/// Mean over frames of the cosine between per-frame displacements; frames
/// where both displacements are zero are skipped.
double tracklet_corr(const Tracklet& a, const Tracklet& b);

double motion_fidelity(const TrackletSet& generated, const TrackletSet& reference);

/// Optional display rescale 50 * (score + 2) / 4 onto [0, 50]; not part of the score.
double fidelity_display_scale(double score);

/// Mean point distance divided by sqrt(H^2 + W^2), clamped to 1.
double mean_distance(const Tracklet& edited, const Tracklet& target, std::size_t height, std::size_t width);

Tracklet average_tracklets(const TrackletSet& set);

/// Mean per-frame displacement over every step of every tracklet in frames
/// [first, last) (0-based step indices).
Displacement mean_flow(const TrackletSet& set, std::size_t first, std::size_t last);

/// "x1,y1 x2,y2 ..." one tracklet per line.
std::string format_tracklets(const TrackletSet& set);
TrackletSet parse_tracklets(const std::string& text);
TrackletSet load_tracklets(const std::filesystem::path& path);
void save_tracklets(const TrackletSet& set, const std::filesystem::path& path);

} // namespace moft
