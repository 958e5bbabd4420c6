#include "moft/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "moft/featurize.hpp"
#include "moft/parallel.hpp"
#include "moft/random.hpp"

namespace moft {
namespace {

Vector pooled_frame(const FeatureTensor& t, std::size_t f) {
    const std::size_t D = t.channels();
    Vector out(D, 0.0);
    auto v = t.frame(f);
    for (std::size_t p = 0; p < t.shape().pixels(); ++p)
        for (std::size_t d = 0; d < D; ++d) out[d] += v[p * D + d];
    for (double& x : out) x /= static_cast<double>(t.shape().pixels());
    return out;
}

Displacement unit(Displacement d) {
    const double n = std::hypot(d.dx, d.dy);
    if (n == 0.0) return {0.0, 0.0};
    return {d.dx / n, d.dy / n};
}

// Centered cumulative displacement of a pattern projected on `axis`.
Vector centered_drive(const MotionPattern& p, Displacement axis) {
    Vector s(p.steps.size() + 1, 0.0);
    for (std::size_t k = 1; k < s.size(); ++k)
        s[k] = s[k - 1] + p.steps[k - 1].dx * axis.dx + p.steps[k - 1].dy * axis.dy;
    const double m = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    for (double& x : s) x -= m;
    return s;
}

// Direction a calibration class pans along: its first nonzero step.
Displacement class_axis(const MotionPattern& p) {
    for (const auto& s : p.steps)
        if (s.dx != 0.0 || s.dy != 0.0) return unit(s);
    return {0.0, 0.0};
}

double flat_norm_at(const Tensor4& t, std::size_t r, std::size_t c) {
    double s = 0.0;
    for (std::size_t f = 0; f < t.frames(); ++f)
        for (double v : t.pixel(f, r, c)) s += v * v;
    return std::sqrt(s);
}

} // namespace

PcaModel fit_pca(const std::vector<Vector>& samples, std::size_t num_components) {
    if (samples.empty()) throw ArgumentError("PCA needs samples");
    const std::size_t D = samples.front().size();
    if (D == 0) throw ArgumentError("PCA samples are empty vectors");
    if (num_components == 0 || num_components > D)
        throw ArgumentError("number of components must lie in [1, " + std::to_string(D) + "]");
    if (samples.size() < num_components + 1)
        throw ArgumentError("PCA with " + std::to_string(num_components) + " components needs at least " +
                            std::to_string(num_components + 1) + " samples");
    const std::size_t n = samples.size();
    Eigen::MatrixXd X(n, D);
    for (std::size_t i = 0; i < n; ++i) {
        if (samples[i].size() != D) throw ShapeError("PCA samples differ in length");
        for (std::size_t d = 0; d < D; ++d) {
            if (!std::isfinite(samples[i][d])) throw DataError("PCA sample " + std::to_string(i) + " is not finite");
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = samples[i][d];
        }
    }
    const Eigen::RowVectorXd mu = X.colwise().mean();
    X.rowwise() -= mu;
    const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");

    PcaModel m;
    m.mean.assign(mu.data(), mu.data() + D);
    // Eigen returns ascending eigenvalues.
    for (std::size_t j = 0; j < num_components; ++j) {
        const auto col = static_cast<Eigen::Index>(D - 1 - j);
        Eigen::VectorXd v = eig.eigenvectors().col(col);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        m.components.emplace_back(v.data(), v.data() + D);
        m.explained_variance.push_back(std::max(0.0, eig.eigenvalues()(col)));
    }
    return m;
}

Vector project(const PcaModel& model, const Vector& sample, std::size_t k) {
    if (k > model.components.size()) throw ArgumentError("projection onto more components than fitted");
    if (sample.size() != model.dimension()) throw ShapeError("sample dimension does not match the PCA model");
    Vector out(k, 0.0);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t d = 0; d < sample.size(); ++d)
            out[j] += (sample[d] - model.mean[d]) * model.components[j][d];
    return out;
}

Vector reconstruct(const PcaModel& model, const Vector& coords) {
    if (coords.size() > model.components.size()) throw ArgumentError("more coordinates than components");
    Vector out = model.mean;
    for (std::size_t j = 0; j < coords.size(); ++j)
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += coords[j] * model.components[j][d];
    return out;
}

std::vector<Vector> pooled_samples(const std::vector<LabeledTensor>& set, bool normalized, bool all_frames) {
    std::vector<Vector> out;
    for (const auto& item : set) {
        const FeatureTensor t = normalized ? content_removal(item.features) : item.features;
        const std::size_t frames = all_frames ? t.frames() : 1;
        for (std::size_t f = 0; f < frames; ++f) out.push_back(pooled_frame(t, f));
    }
    return out;
}

MotionChannelProfile rank_motion_channels(const PcaModel& model, const std::vector<FeatureTensor>& calibration,
                                          double q) {
    if (calibration.empty()) throw ArgumentError("empty calibration set");
    if (model.components.empty()) throw ArgumentError("PCA model has no components");
    const std::size_t D = model.dimension();
    const std::size_t keep = retained_count(q, D);
    const Vector& p1 = model.components.front();

    std::vector<std::size_t> order(D);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(p1[a]) > std::abs(p1[b]); });

    MotionChannelProfile p;
    p.feature_channels = D;
    p.fraction = q;
    p.channels.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    for (std::size_t c : p.channels) p.loading.push_back(std::abs(p1[c]));
    p.stat_min.assign(keep, std::numeric_limits<double>::infinity());
    p.stat_max.assign(keep, -std::numeric_limits<double>::infinity());
    for (const auto& t : calibration) {
        if (t.channels() != D) throw ShapeError("calibration tensor channel count differs from the PCA model");
        const FeatureTensor norm = content_removal(t);
        for (std::size_t f = 0; f < norm.frames(); ++f) {
            const Vector pooled = pooled_frame(norm, f);
            for (std::size_t k = 0; k < keep; ++k) {
                p.stat_min[k] = std::min(p.stat_min[k], pooled[p.channels[k]]);
                p.stat_max[k] = std::max(p.stat_max[k], pooled[p.channels[k]]);
            }
        }
    }
    return p;
}

void calibrate_axes(MotionChannelProfile& profile, const std::vector<LabeledTensor>& set) {
    if (set.empty()) throw ArgumentError("empty calibration set");
    // Mean pooled trace per class and channel.
    std::map<std::string, std::size_t> class_index;
    std::vector<const MotionPattern*> class_pattern;
    std::vector<std::vector<Vector>> sums; // class -> channel -> trace
    std::vector<std::size_t> counts;
    double excursion = 0.0;
    for (const auto& item : set) {
        auto [it, fresh] = class_index.emplace(item.label, class_pattern.size());
        if (fresh) {
            class_pattern.push_back(&item.pattern);
            sums.emplace_back(profile.size(), Vector(item.features.frames(), 0.0));
            counts.push_back(0);
        }
        const std::size_t cls = it->second;
        const FeatureTensor norm = content_removal(item.features);
        for (std::size_t k = 0; k < profile.size(); ++k) {
            const Vector tr = region_trace(norm, profile.channels[k]);
            if (tr.size() != sums[cls][k].size()) throw ShapeError("calibration classes differ in frame count");
            for (std::size_t f = 0; f < tr.size(); ++f) sums[cls][k][f] += tr[f];
        }
        ++counts[cls];
        const Displacement a = class_axis(item.pattern);
        for (double s : centered_drive(item.pattern, a)) excursion = std::max(excursion, std::abs(s));
    }
    if (excursion <= 0.0) throw ArgumentError("calibration set has no motion");
    profile.excursion = excursion;
    profile.axis.assign(profile.size(), {0.0, 0.0});
    for (std::size_t k = 0; k < profile.size(); ++k) {
        double best = -1.0;
        for (std::size_t cls = 0; cls < class_pattern.size(); ++cls) {
            const Displacement a = class_axis(*class_pattern[cls]);
            if (a.dx == 0.0 && a.dy == 0.0) continue;
            Vector tr = sums[cls][k];
            for (double& v : tr) v /= static_cast<double>(counts[cls]);
            double peak = 0.0;
            for (double v : tr) peak = std::max(peak, std::abs(v));
            if (peak <= best) continue;
            best = peak;
            const Vector s = centered_drive(*class_pattern[cls], a);
            double dot = 0.0;
            for (std::size_t f = 0; f < s.size(); ++f) dot += s[f] * tr[f];
            profile.axis[k] = dot >= 0.0 ? a : Displacement{-a.dx, -a.dy};
        }
        if (best < 0.0) throw ArgumentError("calibration set has no moving class");
    }
}

MotionChannelProfile calibrate_profile(const std::vector<LabeledTensor>& set, const CalibrationOptions& opts,
                                       PcaModel* model_out) {
    if (set.empty()) throw ArgumentError("empty calibration set");
    PcaModel model = fit_pca(pooled_samples(set, true, opts.all_frames), opts.num_components);
    std::vector<FeatureTensor> tensors;
    tensors.reserve(set.size());
    for (const auto& item : set) tensors.push_back(item.features);
    MotionChannelProfile p = rank_motion_channels(model, tensors, opts.fraction);
    calibrate_axes(p, set);
    if (model_out) *model_out = std::move(model);
    return p;
}

Vector channel_trace(const FeatureTensor& t, std::size_t channel, Point2 point) {
    if (channel >= t.channels()) throw ArgumentError("channel index out of range");
    if (!(point.row >= 0 && point.col >= 0) || point.row != std::floor(point.row) ||
        point.col != std::floor(point.col) || point.row >= static_cast<double>(t.height()) ||
        point.col >= static_cast<double>(t.width()))
        throw ArgumentError("trace point outside the grid");
    const auto r = static_cast<std::size_t>(point.row), c = static_cast<std::size_t>(point.col);
    Vector out(t.frames());
    for (std::size_t f = 0; f < t.frames(); ++f) out[f] = t.at(f, r, c, channel);
    return out;
}

Vector region_trace(const FeatureTensor& t, std::size_t channel, const RegionMask* mask) {
    if (channel >= t.channels()) throw ArgumentError("channel index out of range");
    if (mask && (mask->height != t.height() || mask->width != t.width()))
        throw ShapeError("mask size does not match tensor");
    Vector out(t.frames(), 0.0);
    std::size_t n = 0;
    for (std::size_t r = 0; r < t.height(); ++r)
        for (std::size_t c = 0; c < t.width(); ++c) {
            if (mask && !mask->contains(r, c)) continue;
            ++n;
            for (std::size_t f = 0; f < t.frames(); ++f) out[f] += t.at(f, r, c, channel);
        }
    if (n == 0) throw ArgumentError("empty trace region");
    for (double& v : out) v /= static_cast<double>(n);
    return out;
}

Point2 Map2::argmax() const {
    const auto it = std::max_element(values.begin(), values.end());
    const auto i = static_cast<std::size_t>(it - values.begin());
    return {static_cast<double>(i / width), static_cast<double>(i % width)};
}

double Map2::mean() const {
    return values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

Map2 cosine_map(const Tensor4& ref, Point2 ref_point, const Tensor4& target) {
    if (ref.frames() != target.frames() || ref.channels() != target.channels())
        throw ShapeError("reference and target differ in frames or channels");
    if (ref_point.row < 0 || ref_point.col < 0 || ref_point.row >= static_cast<double>(ref.height()) ||
        ref_point.col >= static_cast<double>(ref.width()))
        throw ArgumentError("reference point outside the grid");
    const auto rr = static_cast<std::size_t>(ref_point.row), rc = static_cast<std::size_t>(ref_point.col);
    const double rn = flat_norm_at(ref, rr, rc);
    if (rn == 0.0) throw DegenerateReferenceError("reference vector has zero norm");
    Map2 m{target.height(), target.width(), Vector(target.shape().pixels(), 0.0)};
    parallel_for(target.height(), [&](std::size_t r) {
        for (std::size_t c = 0; c < target.width(); ++c) {
            double dot = 0.0, tn = 0.0;
            for (std::size_t f = 0; f < target.frames(); ++f) {
                auto a = ref.pixel(f, rr, rc);
                auto b = target.pixel(f, r, c);
                for (std::size_t k = 0; k < a.size(); ++k) {
                    dot += a[k] * b[k];
                    tn += b[k] * b[k];
                }
            }
            m.values[r * m.width + c] = tn > 0.0 ? dot / (rn * std::sqrt(tn)) : 0.0;
        }
    });
    return m;
}

Map2 normalize_map(Map2 m) {
    const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
    const double a = *lo, span = *hi - *lo;
    for (double& v : m.values) v = span > 0.0 ? (v - a) / span : 1.0;
    return m;
}

Map2 similarity_heatmap(const Moft& ref, Point2 ref_point, const Moft& target) {
    return normalize_map(cosine_map(ref.values, ref_point, target.values));
}

std::vector<ProbeLevel> probe_noise_robustness(const LatentVideo& video, const std::vector<double>& noise_levels,
                                               const MotionChannelProfile& profile, std::uint64_t seed,
                                               Point2 ref_point, std::uint64_t feature_seed) {
    const Tensor4& z = video.z;
    const auto [lo, hi] = std::minmax_element(z.values().begin(), z.values().end());
    const double range = *hi - *lo;
    const FeatureModel model(z.channels(), feature_seed);
    const FeatureTensor clean = model.forward(z);
    const Moft clean_moft = extract_moft(clean, profile);
    auto error = [&](const Map2& m) {
        const Point2 p = m.argmax();
        return std::hypot(p.row - ref_point.row, p.col - ref_point.col);
    };
    std::vector<ProbeLevel> out;
    for (std::size_t i = 0; i < noise_levels.size(); ++i) {
        const double sigma = noise_levels[i];
        if (!(sigma >= 0.0 && sigma < 1.0)) throw ArgumentError("noise levels must lie in [0, 1)");
        Tensor4 noisy = z;
        if (sigma > 0.0) {
            Rng rng(derive_seed(seed, i));
            for (double& v : noisy.values()) v += sigma * range * rng.normal();
        }
        const FeatureTensor features = model.forward(noisy);
        const Moft m = extract_moft(features, profile);
        out.push_back({sigma, error(cosine_map(clean_moft.values, ref_point, m.values)),
                       error(cosine_map(clean, ref_point, features))});
    }
    return out;
}

double nearest_centroid_accuracy(const std::vector<Vector>& points, const std::vector<std::string>& labels) {
    if (points.empty() || points.size() != labels.size()) throw ArgumentError("points and labels must match");
    std::map<std::string, std::pair<Vector, std::size_t>> centroids;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& [sum, n] = centroids[labels[i]];
        if (sum.empty()) sum.assign(points[i].size(), 0.0);
        for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += points[i][d];
        ++n;
    }
    for (auto& [label, cn] : centroids)
        for (double& v : cn.first) v /= static_cast<double>(cn.second);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::string pick;
        for (const auto& [label, cn] : centroids) {
            double d2 = 0.0;
            for (std::size_t d = 0; d < cn.first.size(); ++d) d2 += (points[i][d] - cn.first[d]) * (points[i][d] - cn.first[d]);
            if (d2 < best) {
                best = d2;
                pick = label;
            }
        }
        if (pick == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(points.size());
}

} // namespace moft
