#include "moft/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "moft/featurize.hpp"
#include "moft/random.hpp"

namespace moft {
namespace {

constexpr double kBaseCellPixels = 4.0;
constexpr double kWarpLow = 0.35;
constexpr double kWarpHigh = 0.9;

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

std::size_t wrap_index(std::ptrdiff_t i, std::size_t n) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    return static_cast<std::size_t>(((i % m) + m) % m);
}

// One periodic value-noise layer with `cy` x `cx` lattice cells.
std::vector<double> noise_layer(Rng& rng, std::size_t H, std::size_t W, std::size_t cy, std::size_t cx) {
    std::vector<double> lattice(cy * cx);
    for (double& v : lattice) v = rng.uniform();
    std::vector<double> out(H * W);
    for (std::size_t r = 0; r < H; ++r) {
        const double v = static_cast<double>(r) * static_cast<double>(cy) / static_cast<double>(H);
        const auto y0 = static_cast<std::size_t>(v);
        const double ty = smoothstep(v - static_cast<double>(y0));
        const std::size_t ya = y0 % cy, yb = (y0 + 1) % cy;
        for (std::size_t c = 0; c < W; ++c) {
            const double u = static_cast<double>(c) * static_cast<double>(cx) / static_cast<double>(W);
            const auto x0 = static_cast<std::size_t>(u);
            const double tx = smoothstep(u - static_cast<double>(x0));
            const std::size_t xa = x0 % cx, xb = (x0 + 1) % cx;
            const double top = lattice[ya * cx + xa] * (1 - tx) + lattice[ya * cx + xb] * tx;
            const double bot = lattice[yb * cx + xa] * (1 - tx) + lattice[yb * cx + xb] * tx;
            out[r * W + c] = top * (1 - ty) + bot * ty;
        }
    }
    return out;
}

void validate_scene(const SceneSpec& scene) {
    if (scene.height == 0 || scene.width == 0 || scene.frames == 0 || scene.latent_channels == 0)
        throw ArgumentError("scene dimensions must be >= 1");
    if (scene.octaves == 0) throw ArgumentError("scene needs at least one noise octave");
}

} // namespace

Displacement MotionPattern::mean_step() const {
    Displacement m;
    if (steps.empty()) return m;
    for (const auto& s : steps) {
        m.dx += s.dx;
        m.dy += s.dy;
    }
    m.dx /= static_cast<double>(steps.size());
    m.dy /= static_cast<double>(steps.size());
    return m;
}

Tensor4 generate_base_image(const SceneSpec& scene) {
    validate_scene(scene);
    const std::size_t H = scene.height, W = scene.width, C = scene.latent_channels;
    Rng rng(derive_seed(scene.seed, 0xBA5E));
    Tensor4 img(Shape{1, H, W, C});
    for (std::size_t ch = 0; ch < C; ++ch) {
        std::vector<double> acc(H * W, 0.0);
        std::size_t cy = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(H / kBaseCellPixels)));
        std::size_t cx = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(W / kBaseCellPixels)));
        double amp = 1.0;
        for (std::size_t o = 0; o < scene.octaves; ++o) {
            const auto layer = noise_layer(rng, H, W, std::min(cy, H), std::min(cx, W));
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += amp * layer[i];
            amp *= 0.5;
            cy *= 2;
            cx *= 2;
        }
        const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
        const double span = *hi - *lo;
        // Per-scene channel bias: shared content that differs between scenes.
        const double bias = rng.uniform(0.25, 0.75);
        for (std::size_t i = 0; i < acc.size(); ++i) {
            const double n = span > 0.0 ? (acc[i] - *lo) / span : 0.5;
            img.at(0, i / W, i % W, ch) = std::clamp(bias + 0.25 * (2.0 * n - 1.0), 0.0, 1.0);
        }
    }
    return img;
}

double sample_wrapped(const Tensor4& t, std::size_t f, double row, double col, std::size_t ch) {
    const double fr = std::floor(row), fc = std::floor(col);
    const double ar = row - fr, ac = col - fc;
    const std::size_t r0 = wrap_index(static_cast<std::ptrdiff_t>(fr), t.height());
    const std::size_t r1 = wrap_index(static_cast<std::ptrdiff_t>(fr) + 1, t.height());
    const std::size_t c0 = wrap_index(static_cast<std::ptrdiff_t>(fc), t.width());
    const std::size_t c1 = wrap_index(static_cast<std::ptrdiff_t>(fc) + 1, t.width());
    const double top = (1.0 - ac) * t.at(f, r0, c0, ch) + ac * t.at(f, r0, c1, ch);
    const double bot = (1.0 - ac) * t.at(f, r1, c0, ch) + ac * t.at(f, r1, c1, ch);
    return (1.0 - ar) * top + ar * bot;
}

Tensor4 pan_image(const Tensor4& base, const MotionPattern& pattern) {
    const std::size_t F = pattern.steps.size() + 1;
    const std::size_t H = base.height(), W = base.width(), C = base.channels();
    for (const auto& s : pattern.steps) {
        if (!std::isfinite(s.dx) || !std::isfinite(s.dy) || std::abs(s.dx) > kMaxStepDisplacement ||
            std::abs(s.dy) > kMaxStepDisplacement)
            throw RangeError("displacement component outside [-3, 3]");
    }
    Tensor4 out(Shape{F, H, W, C});
    double ox = 0.0, oy = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
        if (f > 0) {
            ox += pattern.steps[f - 1].dx;
            oy += pattern.steps[f - 1].dy;
        }
        for (std::size_t r = 0; r < H; ++r)
            for (std::size_t c = 0; c < W; ++c)
                for (std::size_t ch = 0; ch < C; ++ch)
                    out.at(f, r, c, ch) =
                        sample_wrapped(base, 0, static_cast<double>(r) - oy, static_cast<double>(c) - ox, ch);
    }
    return out;
}

LatentVideo generate_panning_video(const SceneSpec& scene, const MotionPattern& pattern) {
    validate_scene(scene);
    if (pattern.steps.size() + 1 != scene.frames)
        throw ArgumentError("motion pattern has " + std::to_string(pattern.steps.size()) +
                            " displacements, expected " + std::to_string(scene.frames - 1));
    return {pan_image(generate_base_image(scene), pattern), scene.seed};
}

MotionPattern constant_pattern(Displacement step, std::size_t frames, std::string label) {
    if (frames == 0) throw ArgumentError("pattern needs at least one frame");
    return {std::vector<Displacement>(frames - 1, step), std::move(label)};
}

MotionPattern named_pattern(const std::string& name, std::size_t frames, double speed) {
    if (frames == 0) throw ArgumentError("pattern needs at least one frame");
    const std::size_t n = frames - 1;
    auto two_phase = [&](Displacement a) {
        MotionPattern p{std::vector<Displacement>(n), name};
        for (std::size_t i = 0; i < n; ++i)
            p.steps[i] = (i < (n + 1) / 2) ? a : Displacement{-a.dx, -a.dy};
        return p;
    };
    if (name == "right") return constant_pattern({speed, 0.0}, frames, name);
    if (name == "left") return constant_pattern({-speed, 0.0}, frames, name);
    if (name == "down") return constant_pattern({0.0, speed}, frames, name);
    if (name == "up") return constant_pattern({0.0, -speed}, frames, name);
    if (name == "static") return constant_pattern({0.0, 0.0}, frames, name);
    if (name == "right-then-left") return two_phase({speed, 0.0});
    if (name == "left-then-right") return two_phase({-speed, 0.0});
    if (name == "down-then-up") return two_phase({0.0, speed});
    if (name == "up-then-down") return two_phase({0.0, -speed});
    throw ArgumentError("unknown motion pattern '" + name + "'");
}

std::vector<LabeledTensor> build_calibration_set(const std::vector<MotionPattern>& directions,
                                                 std::size_t scenes_per_direction, std::uint64_t seed,
                                                 const SceneSpec& geometry, std::uint64_t feature_seed) {
    if (directions.empty()) throw ArgumentError("calibration needs at least one direction");
    if (directions.size() < 2) throw ArgumentError("calibration needs at least two direction classes");
    if (scenes_per_direction == 0) throw ArgumentError("calibration needs at least one scene per direction");
    std::vector<LabeledTensor> out;
    out.reserve(directions.size() * scenes_per_direction);
    std::uint64_t tag = 0;
    for (const auto& pattern : directions) {
        for (std::size_t s = 0; s < scenes_per_direction; ++s) {
            SceneSpec scene = geometry;
            scene.frames = pattern.steps.size() + 1;
            scene.seed = derive_seed(seed, tag++);
            LatentVideo video = generate_panning_video(scene, pattern);
            FeatureTensor features = featurize(video, feature_seed);
            out.push_back({std::move(features), pattern.label, pattern, std::move(video)});
        }
    }
    return out;
}

LatentVideo generate_warp_video(const SceneSpec& scene, double amplitude) {
    validate_scene(scene);
    const Tensor4 base = generate_base_image(scene);
    const std::size_t F = scene.frames, H = scene.height, W = scene.width, C = scene.latent_channels;
    Tensor4 out(Shape{F, H, W, C});
    const double pi = std::numbers::pi;
    for (std::size_t f = 0; f < F; ++f) {
        const double k = static_cast<double>(f);
        for (std::size_t r = 0; r < H; ++r) {
            const double rr = static_cast<double>(r) / static_cast<double>(H);
            for (std::size_t c = 0; c < W; ++c) {
                const double cc = static_cast<double>(c) / static_cast<double>(W);
                // Two temporal frequencies mixed by row angle, phase by column.
                const double theta = pi * rr;
                const double phase = 2.0 * pi * cc;
                const double u = amplitude * (std::cos(theta) * std::sin(kWarpLow * k + phase) +
                                              std::sin(theta) * std::sin(kWarpHigh * k + phase));
                for (std::size_t ch = 0; ch < C; ++ch)
                    out.at(f, r, c, ch) = sample_wrapped(base, 0, static_cast<double>(r), static_cast<double>(c) - u, ch);
            }
        }
    }
    return {std::move(out), scene.seed};
}

} // namespace moft
