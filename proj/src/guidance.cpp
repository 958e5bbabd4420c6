#include "moft/guidance.hpp"

#include <algorithm>
#include <cmath>

#include "moft/random.hpp"
#include "moft/synth.hpp"

namespace moft {
namespace {

constexpr double kDivergenceLimit = 1e6;

struct Bilinear {
    std::size_t r0, r1, c0, c1;
    double ar, ac;
};

Bilinear bilinear_at(Point2 p, std::size_t H, std::size_t W) {
    if (!(p.row >= 0.0 && p.col >= 0.0 && p.row <= static_cast<double>(H - 1) && p.col <= static_cast<double>(W - 1)))
        throw ArgumentError("drag point (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                            ") outside the spatial domain");
    Bilinear b;
    b.r0 = static_cast<std::size_t>(std::floor(p.row));
    b.c0 = static_cast<std::size_t>(std::floor(p.col));
    b.r1 = std::min(b.r0 + 1, H - 1);
    b.c1 = std::min(b.c0 + 1, W - 1);
    b.ar = p.row - static_cast<double>(b.r0);
    b.ac = p.col - static_cast<double>(b.c0);
    return b;
}

std::vector<double> sample_features(const FeatureTensor& t, std::size_t f, const Bilinear& b) {
    const std::size_t D = t.channels();
    std::vector<double> out(D);
    auto p00 = t.pixel(f, b.r0, b.c0), p01 = t.pixel(f, b.r0, b.c1);
    auto p10 = t.pixel(f, b.r1, b.c0), p11 = t.pixel(f, b.r1, b.c1);
    for (std::size_t d = 0; d < D; ++d)
        out[d] = (1 - b.ar) * ((1 - b.ac) * p00[d] + b.ac * p01[d]) + b.ar * ((1 - b.ac) * p10[d] + b.ac * p11[d]);
    return out;
}

void check_drag(const FeatureTensor& t, const DragSpec& spec) {
    if (spec.trajectory.size() != t.frames())
        throw ArgumentError("drag trajectory has " + std::to_string(spec.trajectory.size()) + " points, expected " +
                            std::to_string(t.frames()));
}

void check_motion(const Moft& moft, const Moft& ref, const RegionMask& mask) {
    if (!(moft.values.shape() == ref.values.shape()))
        throw ShapeError("moft and reference shapes differ");
    if (mask.height != moft.height() || mask.width != moft.width()) throw ShapeError("mask size does not match moft");
    if (mask.count() == 0) throw ArgumentError("empty region mask");
}

// Per-location distance and its per-entry derivative (zero at exact matches).
double location_norm(const Tensor4& a, const Tensor4& b, std::size_t r, std::size_t c) {
    double s = 0.0;
    for (std::size_t f = 0; f < a.frames(); ++f) {
        auto x = a.pixel(f, r, c);
        auto y = b.pixel(f, r, c);
        for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    }
    return std::sqrt(s);
}

} // namespace

void GuidanceConfig::validate() const {
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (!(steps >= t1 && t1 > t2 && t2 > t3 && t3 >= 0))
        throw ConfigError("schedule thresholds must satisfy T >= t1 > t2 > t3 >= 0");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and >= 0");
    if (inner_iters < 0) throw ConfigError("inner iterations must be >= 0");
    if (!(wc >= 0.0 && wp >= 0.0)) throw ConfigError("loss weights must be >= 0");
    if (!(denoise_blend >= 0.0 && denoise_blend <= 1.0)) throw ConfigError("denoise blend must lie in [0, 1]");
}

DragSpec DragSpec::linear(Point2 start, Point2 target, std::size_t frames) {
    if (frames == 0) throw ArgumentError("drag needs at least one frame");
    DragSpec s{start, target, {}};
    for (std::size_t f = 0; f < frames; ++f) {
        const double a = frames > 1 ? static_cast<double>(f) / static_cast<double>(frames - 1) : 0.0;
        s.trajectory.push_back({start.row + a * (target.row - start.row), start.col + a * (target.col - start.col)});
    }
    return s;
}

RegionMask drag_region(const DragSpec& spec, std::size_t height, std::size_t width, std::size_t frames,
                       double half_width) {
    if (half_width < 0.0) throw ArgumentError("half width must be non-negative");
    RegionMask m = RegionMask::full(height, width, frames);
    const double r0 = std::min(spec.start.row, spec.target.row) - half_width;
    const double r1 = std::max(spec.start.row, spec.target.row) + half_width;
    const double c0 = std::min(spec.start.col, spec.target.col) - half_width;
    const double c1 = std::max(spec.start.col, spec.target.col) + half_width;
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
            const double rr = static_cast<double>(r), cc = static_cast<double>(c);
            m.inside[r * width + c] = (rr >= r0 && rr <= r1 && cc >= c0 && cc <= c1) ? 1 : 0;
        }
    return m;
}

LossWeights loss_schedule(int t, const GuidanceConfig& cfg) {
    cfg.validate();
    if (t < 0 || t >= cfg.steps) throw ArgumentError("step outside [0, T)");
    if (t >= cfg.t1) return {cfg.wc, 0.0};
    if (t >= cfg.t2) return {cfg.wc, cfg.wp};
    if (t >= cfg.t3) return {0.0, cfg.wp};
    return {0.0, 0.0};
}

LossWeights motion_only_schedule(int t, const GuidanceConfig& cfg) {
    if (t < 0 || t >= cfg.steps) throw ArgumentError("step outside [0, T)");
    return {t >= cfg.t3 ? cfg.wc : 0.0, 0.0};
}

double motion_loss(const Moft& moft, const Moft& ref, const RegionMask& mask) {
    check_motion(moft, ref, mask);
    double sum = 0.0;
    for (std::size_t r = 0; r < mask.height; ++r)
        for (std::size_t c = 0; c < mask.width; ++c)
            if (mask.contains(r, c)) sum += location_norm(moft.values, ref.values, r, c);
    return sum / static_cast<double>(mask.count());
}

FeatureTensor motion_loss_feature_grad(const FeatureTensor& features, const Moft& ref, const RegionMask& mask,
                                       const MotionChannelProfile& profile) {
    const Moft m = extract_moft(features, profile);
    check_motion(m, ref, mask);
    const double inv = 1.0 / static_cast<double>(mask.count());
    Tensor4 gm(m.values.shape());
    for (std::size_t r = 0; r < mask.height; ++r)
        for (std::size_t c = 0; c < mask.width; ++c) {
            if (!mask.contains(r, c)) continue;
            const double n = location_norm(m.values, ref.values, r, c);
            if (n == 0.0) continue;
            for (std::size_t f = 0; f < m.frames(); ++f) {
                auto x = m.values.pixel(f, r, c);
                auto y = ref.values.pixel(f, r, c);
                auto g = gm.pixel(f, r, c);
                for (std::size_t k = 0; k < x.size(); ++k) g[k] = inv * (x[k] - y[k]) / n;
            }
        }
    // Adjoint of content removal then channel selection.
    const Tensor4 gmean = frame_mean(gm);
    FeatureTensor out(features.shape());
    for (std::size_t f = 0; f < features.frames(); ++f)
        for (std::size_t r = 0; r < features.height(); ++r)
            for (std::size_t c = 0; c < features.width(); ++c) {
                auto g = gm.pixel(f, r, c);
                auto gbar = gmean.pixel(0, r, c);
                auto dst = out.pixel(f, r, c);
                for (std::size_t k = 0; k < g.size(); ++k) dst[profile.channels[k]] += g[k] - gbar[k];
            }
    return out;
}

std::vector<double> drag_anchor(const FeatureTensor& features, const DragSpec& spec) {
    check_drag(features, spec);
    return sample_features(features, 0, bilinear_at(spec.trajectory[0], features.height(), features.width()));
}

double drag_loss(const FeatureTensor& features, const DragSpec& spec, const std::vector<double>& anchor) {
    check_drag(features, spec);
    if (anchor.size() != features.channels()) throw ShapeError("drag anchor length does not match features");
    const std::size_t H = features.height(), W = features.width();
    double sum = 0.0;
    for (std::size_t f = 1; f < features.frames(); ++f) {
        const auto v = sample_features(features, f, bilinear_at(spec.trajectory[f], H, W));
        double s = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d) s += (v[d] - anchor[d]) * (v[d] - anchor[d]);
        sum += std::sqrt(s);
    }
    return sum;
}

double drag_loss(const FeatureTensor& features, const DragSpec& spec) {
    return drag_loss(features, spec, drag_anchor(features, spec));
}

FeatureTensor drag_loss_feature_grad(const FeatureTensor& features, const DragSpec& spec) {
    check_drag(features, spec);
    const std::size_t H = features.height(), W = features.width(), D = features.channels();
    const auto anchor = sample_features(features, 0, bilinear_at(spec.trajectory[0], H, W));
    FeatureTensor out(features.shape());
    for (std::size_t f = 1; f < features.frames(); ++f) {
        const Bilinear b = bilinear_at(spec.trajectory[f], H, W);
        const auto v = sample_features(features, f, b);
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) s += (v[d] - anchor[d]) * (v[d] - anchor[d]);
        const double n = std::sqrt(s);
        if (n == 0.0) continue;
        const double w[4] = {(1 - b.ar) * (1 - b.ac), (1 - b.ar) * b.ac, b.ar * (1 - b.ac), b.ar * b.ac};
        const std::size_t rs[4] = {b.r0, b.r0, b.r1, b.r1}, cs[4] = {b.c0, b.c1, b.c0, b.c1};
        for (int j = 0; j < 4; ++j) {
            if (w[j] == 0.0) continue;
            auto dst = out.pixel(f, rs[j], cs[j]);
            for (std::size_t d = 0; d < D; ++d) dst[d] += w[j] * (v[d] - anchor[d]) / n;
        }
    }
    return out;
}

Tensor4 masked_clip(const Tensor4& grad, const RegionMask& mask) {
    if (mask.height != grad.height() || mask.width != grad.width()) throw ShapeError("mask size does not match gradient");
    Tensor4 out(grad.shape());
    for (std::size_t f = 0; f < grad.frames(); ++f) {
        if (!mask.has_frame(f)) continue;
        for (std::size_t r = 0; r < grad.height(); ++r)
            for (std::size_t c = 0; c < grad.width(); ++c) {
                if (!mask.contains(r, c)) continue;
                auto src = grad.pixel(f, r, c);
                auto dst = out.pixel(f, r, c);
                std::copy(src.begin(), src.end(), dst.begin());
            }
    }
    return out;
}

double motion_loss_at(const Tensor4& z, const Moft& ref, const RegionMask& mask, const MotionChannelProfile& profile,
                      const FeatureModel& model) {
    return motion_loss(extract_moft(model.forward(z), profile), ref, mask);
}

double drag_loss_at(const Tensor4& z, const DragSpec& spec, const FeatureModel& model) {
    return drag_loss(model.forward(z), spec);
}

double drag_loss_at(const Tensor4& z, const DragSpec& spec, const std::vector<double>& anchor,
                    const FeatureModel& model) {
    return drag_loss(model.forward(z), spec, anchor);
}

Tensor4 grad_motion_loss(const Tensor4& z, const Moft& ref, const RegionMask& mask,
                         const MotionChannelProfile& profile, const FeatureModel& model) {
    return model.backward(z, motion_loss_feature_grad(model.forward(z), ref, mask, profile));
}

Tensor4 grad_drag_loss(const Tensor4& z, const DragSpec& spec, const FeatureModel& model) {
    return model.backward(z, drag_loss_feature_grad(model.forward(z), spec));
}

GuidanceResult run_guidance(const LatentVideo& z_init, const Moft& ref, const RegionMask& mask,
                            const std::optional<DragSpec>& drag, const GuidanceConfig& cfg,
                            const MotionChannelProfile& profile, const UpdateObserver& observer) {
    cfg.validate();
    require_finite(z_init.z, "initial latent");
    const Tensor4& z0 = z_init.z;
    if (ref.frames() != z0.frames() || ref.height() != z0.height() || ref.width() != z0.width())
        throw ShapeError("reference moft shape does not match the latent video");
    if (mask.height != z0.height() || mask.width != z0.width()) throw ShapeError("mask size does not match latent");
    if (mask.count() == 0) throw ArgumentError("empty region mask");
    if (drag) check_drag(z0, *drag);

    const FeatureModel model(z0.channels(), cfg.seed);
    RegionMask clip = mask;
    clip.frame_set.clear();
    for (std::size_t f : cfg.clip_frames)
        if (f < z0.frames()) clip.frame_set.push_back(f);

    GuidanceResult res{z_init, {}};
    Tensor4& z = res.z.z;
    auto check = [](int t, double v, const char* what) {
        if (!std::isfinite(v) || v > kDivergenceLimit)
            throw DivergenceError(t, std::string(what) + " = " + std::to_string(v));
    };
    for (int t = cfg.steps - 1; t >= 0; --t) {
        const LossWeights w = drag ? loss_schedule(t, cfg) : motion_only_schedule(t, cfg);
        StepLog entry{t, w.wc, w.wp, 0.0, 0.0};
        for (int it = 0; it < std::max(cfg.inner_iters, 1); ++it) {
            const FeatureTensor x = model.forward(z);
            const double lc = motion_loss(extract_moft(x, profile), ref, mask);
            const double lp = drag ? drag_loss(x, *drag) : 0.0;
            check(t, lc, "motion loss");
            check(t, lp, "drag loss");
            if (it == 0) {
                entry.motion = lc;
                entry.drag = lp;
            }
            if (it >= cfg.inner_iters || (w.wc == 0.0 && w.wp == 0.0)) break;
            FeatureTensor gx(x.shape());
            if (w.wc > 0.0) gx += w.wc * motion_loss_feature_grad(x, ref, mask, profile);
            if (w.wp > 0.0) gx += w.wp * drag_loss_feature_grad(x, *drag);
            Tensor4 update = cfg.lr * masked_clip(model.backward(z, gx), clip);
            if (observer) observer(t, it, update);
            z -= update;
        }
        res.log.push_back(entry);
        if (cfg.denoise_blend > 0.0) {
            const Tensor4 blurred = box_blur3(z);
            z = (1.0 - cfg.denoise_blend) * z + cfg.denoise_blend * blurred;
        }
        for (double v : z.values())
            if (!std::isfinite(v)) throw DivergenceError(t, "non-finite latent");
    }
    return res;
}

GradCheckResult gradient_check(std::uint64_t seed, std::size_t points, std::size_t coords, double h) {
    GradCheckResult out;
    SceneSpec scene;
    const FeatureModel model(scene.latent_channels, seed);
    MotionChannelProfile profile;
    profile.feature_channels = model.channels();
    profile.fraction = 0.04;
    for (std::size_t j = 0; j < 3; ++j) {
        profile.channels.push_back(model.motion_channels()[j]);
        profile.loading.push_back(1.0);
    }
    const RegionMask mask = RegionMask::full(scene.height, scene.width, scene.frames);
    Rng rng(derive_seed(seed, 0x6C));
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}); };
    for (std::size_t p = 0; p < points; ++p) {
        scene.seed = rng.next();
        const Displacement step{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
        Tensor4 z = generate_panning_video(scene, constant_pattern(step, scene.frames, "check")).z;
        SceneSpec other = scene;
        other.seed = rng.next();
        const Tensor4 zr = generate_panning_video(other, constant_pattern({-step.dx, step.dy}, scene.frames, "ref")).z;
        const Moft ref = extract_moft(model.forward(zr), profile);
        const DragSpec drag = DragSpec::linear({rng.uniform(4, 27), rng.uniform(4, 27)},
                                               {rng.uniform(4, 27), rng.uniform(4, 27)}, scene.frames);
        const Tensor4 gc = grad_motion_loss(z, ref, mask, profile, model);
        const Tensor4 gp = grad_drag_loss(z, drag, model);
        const std::vector<double> anchor = drag_anchor(model.forward(z), drag);
        for (std::size_t k = 0; k < coords; ++k) {
            const std::size_t i = rng.index(z.size());
            const double saved = z.values()[i];
            z.values()[i] = saved + h;
            const double cp = motion_loss_at(z, ref, mask, profile, model), pp = drag_loss_at(z, drag, anchor, model);
            z.values()[i] = saved - h;
            const double cm = motion_loss_at(z, ref, mask, profile, model), pm = drag_loss_at(z, drag, anchor, model);
            z.values()[i] = saved;
            out.max_rel_error = std::max(out.max_rel_error, rel(gc.values()[i], (cp - cm) / (2 * h)));
            out.max_rel_error = std::max(out.max_rel_error, rel(gp.values()[i], (pp - pm) / (2 * h)));
            out.coordinates += 2;
        }
    }
    return out;
}

} // namespace moft
