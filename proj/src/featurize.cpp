#include "moft/featurize.hpp"

#include <algorithm>
#include <numeric>

#include "moft/parallel.hpp"
#include "moft/random.hpp"

namespace moft {
namespace {

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

// Intermediates of the motion path, kept for the backward pass.
struct MotionState {
    std::size_t F = 0, H = 0, W = 0, C = 0;
    std::vector<double> zbar, gx, gy; // H*W*C
    std::vector<double> pooled_energy; // H*W, includes the floor
    std::vector<double> nx, ny;        // F*H*W pooled numerators
    std::vector<double> mx, my;        // F*H*W responses
};

// Sum of `field` (H*W per frame, `frames` frames) over a clamped square window.
std::vector<double> window_sum(const std::vector<double>& field, std::size_t frames, std::size_t H, std::size_t W,
                               std::size_t side) {
    const auto half = static_cast<std::ptrdiff_t>(side / 2);
    std::vector<double> out(field.size(), 0.0);
    for (std::size_t f = 0; f < frames; ++f) {
        const double* src = field.data() + f * H * W;
        double* dst = out.data() + f * H * W;
        for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
                double s = 0.0;
                for (std::ptrdiff_t dr = -half; dr <= half; ++dr) {
                    const std::size_t rr = clamp_index(static_cast<std::ptrdiff_t>(r) + dr, H);
                    for (std::ptrdiff_t dc = -half; dc <= half; ++dc)
                        s += src[rr * W + clamp_index(static_cast<std::ptrdiff_t>(c) + dc, W)];
                }
                dst[r * W + c] = s;
            }
        }
    }
    return out;
}

// Adjoint of window_sum.
std::vector<double> window_sum_adjoint(const std::vector<double>& grad, std::size_t frames, std::size_t H,
                                       std::size_t W, std::size_t side) {
    const auto half = static_cast<std::ptrdiff_t>(side / 2);
    std::vector<double> out(grad.size(), 0.0);
    for (std::size_t f = 0; f < frames; ++f) {
        const double* src = grad.data() + f * H * W;
        double* dst = out.data() + f * H * W;
        for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
                const double g = src[r * W + c];
                if (g == 0.0) continue;
                for (std::ptrdiff_t dr = -half; dr <= half; ++dr) {
                    const std::size_t rr = clamp_index(static_cast<std::ptrdiff_t>(r) + dr, H);
                    for (std::ptrdiff_t dc = -half; dc <= half; ++dc)
                        dst[rr * W + clamp_index(static_cast<std::ptrdiff_t>(c) + dc, W)] += g;
                }
            }
        }
    }
    return out;
}

MotionState motion_forward(const Tensor4& z, const FeatureModelConfig& cfg) {
    MotionState s;
    s.F = z.frames();
    s.H = z.height();
    s.W = z.width();
    s.C = z.channels();
    const std::size_t HW = s.H * s.W, HWC = HW * s.C;

    const Tensor4 mean = frame_mean(z);
    s.zbar.assign(mean.values().begin(), mean.values().end());
    s.gx.assign(HWC, 0.0);
    s.gy.assign(HWC, 0.0);
    std::vector<double> energy(HW, 0.0);
    for (std::size_t r = 0; r < s.H; ++r) {
        const std::size_t up = clamp_index(static_cast<std::ptrdiff_t>(r) - 1, s.H);
        const std::size_t dn = clamp_index(static_cast<std::ptrdiff_t>(r) + 1, s.H);
        for (std::size_t c = 0; c < s.W; ++c) {
            const std::size_t lf = clamp_index(static_cast<std::ptrdiff_t>(c) - 1, s.W);
            const std::size_t rt = clamp_index(static_cast<std::ptrdiff_t>(c) + 1, s.W);
            double e = 0.0;
            for (std::size_t ch = 0; ch < s.C; ++ch) {
                const std::size_t i = (r * s.W + c) * s.C + ch;
                s.gx[i] = 0.5 * (s.zbar[(r * s.W + rt) * s.C + ch] - s.zbar[(r * s.W + lf) * s.C + ch]);
                s.gy[i] = 0.5 * (s.zbar[(dn * s.W + c) * s.C + ch] - s.zbar[(up * s.W + c) * s.C + ch]);
                e += s.gx[i] * s.gx[i] + s.gy[i] * s.gy[i];
            }
            energy[r * s.W + c] = e;
        }
    }
    s.pooled_energy = window_sum(energy, 1, s.H, s.W, cfg.motion_window);
    for (double& q : s.pooled_energy) q += cfg.energy_floor;

    std::vector<double> px(s.F * HW, 0.0), py(s.F * HW, 0.0);
    auto zv = z.values();
    for (std::size_t f = 0; f < s.F; ++f) {
        for (std::size_t p = 0; p < HW; ++p) {
            double ax = 0.0, ay = 0.0;
            for (std::size_t ch = 0; ch < s.C; ++ch) {
                const std::size_t i = p * s.C + ch;
                const double res = zv[f * HWC + i] - s.zbar[i];
                ax -= res * s.gx[i];
                ay -= res * s.gy[i];
            }
            px[f * HW + p] = ax;
            py[f * HW + p] = ay;
        }
    }
    s.nx = window_sum(px, s.F, s.H, s.W, cfg.motion_window);
    s.ny = window_sum(py, s.F, s.H, s.W, cfg.motion_window);
    s.mx.resize(s.F * HW);
    s.my.resize(s.F * HW);
    for (std::size_t f = 0; f < s.F; ++f) {
        for (std::size_t p = 0; p < HW; ++p) {
            s.mx[f * HW + p] = s.nx[f * HW + p] / s.pooled_energy[p];
            s.my[f * HW + p] = s.ny[f * HW + p] / s.pooled_energy[p];
        }
    }
    return s;
}

} // namespace

FeatureModel::FeatureModel(std::size_t latent_channels, std::uint64_t seed, FeatureModelConfig config)
    : config_(config), latent_channels_(latent_channels) {
    if (latent_channels == 0) throw ArgumentError("latent video needs at least one channel");
    if (config_.patch % 2 == 0 || config_.motion_window % 2 == 0)
        throw ArgumentError("patch and motion window sizes must be odd");
    const std::size_t D = config_.channels;
    if (D < 8) throw ArgumentError("feature model needs at least 8 channels");

    Rng rng(derive_seed(seed, 0xFEA7));
    projection_.resize(D * patch_inputs());
    for (double& w : projection_) w = rng.normal();

    std::vector<std::size_t> order(D);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = D - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);

    motion_weights_.assign(D, {0.0, 0.0});
    for (auto& w : motion_weights_) w = {config_.motion_leak * rng.normal(), config_.motion_leak * rng.normal()};
    // Horizontal motion is carried more strongly than vertical, so the leading
    // principal direction of normalized features is well defined.
    constexpr std::array<std::array<double, 2>, 5> dedicated = {
        {{1.0, 0.0}, {-0.85, 0.0}, {0.7, 0.0}, {0.0, 0.55}, {0.0, -0.5}}};
    for (std::size_t j = 0; j < dedicated.size(); ++j) {
        const std::size_t c = order[j];
        motion_channels_.push_back(c);
        motion_weights_[c] = dedicated[j];
        for (std::size_t in = 0; in < patch_inputs(); ++in)
            projection_[c * patch_inputs() + in] *= config_.motion_channel_appearance;
    }
}

void FeatureModel::check_input(const Tensor4& z) const {
    if (z.channels() != latent_channels_)
        throw ShapeError("feature model expects " + std::to_string(latent_channels_) + " latent channels, got " +
                         std::to_string(z.channels()));
}

Tensor4 FeatureModel::appearance(const Tensor4& z) const {
    check_input(z);
    const std::size_t F = z.frames(), H = z.height(), W = z.width(), C = z.channels();
    const std::size_t D = config_.channels, P = patch_inputs();
    const auto half = static_cast<std::ptrdiff_t>(config_.patch / 2);
    Tensor4 out(Shape{F, H, W, D});
    parallel_for(F, [&](std::size_t f) {
        std::vector<double> patch(P);
        for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
                std::size_t k = 0;
                for (std::ptrdiff_t dr = -half; dr <= half; ++dr) {
                    const std::size_t rr = clamp_index(static_cast<std::ptrdiff_t>(r) + dr, H);
                    for (std::ptrdiff_t dc = -half; dc <= half; ++dc) {
                        const std::size_t cc = clamp_index(static_cast<std::ptrdiff_t>(c) + dc, W);
                        auto px = z.pixel(f, rr, cc);
                        for (std::size_t ch = 0; ch < C; ++ch) patch[k++] = px[ch];
                    }
                }
                auto dst = out.pixel(f, r, c);
                for (std::size_t d = 0; d < D; ++d) {
                    const double* w = projection_.data() + d * P;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < P; ++i) acc += w[i] * patch[i];
                    dst[d] = acc;
                }
            }
        }
    });
    return out;
}

MotionResponse FeatureModel::motion(const Tensor4& z) const {
    check_input(z);
    MotionState s = motion_forward(z, config_);
    const Shape shape{s.F, s.H, s.W, 1};
    return {Tensor4(shape, std::move(s.mx)), Tensor4(shape, std::move(s.my))};
}

Tensor4 FeatureModel::forward(const Tensor4& z) const {
    Tensor4 out = appearance(z);
    if (z.frames() < 2) return out;
    const MotionState s = motion_forward(z, config_);
    const std::size_t HW = s.H * s.W;
    const double gain = config_.motion_gain;
    for (std::size_t f = 0; f < s.F; ++f) {
        for (std::size_t p = 0; p < HW; ++p) {
            const double mx = gain * s.mx[f * HW + p];
            const double my = gain * s.my[f * HW + p];
            auto dst = out.pixel(f, p / s.W, p % s.W);
            for (std::size_t d = 0; d < dst.size(); ++d)
                dst[d] += motion_weights_[d][0] * mx + motion_weights_[d][1] * my;
        }
    }
    return out;
}

Tensor4 FeatureModel::backward(const Tensor4& z, const Tensor4& grad_features) const {
    check_input(z);
    const std::size_t F = z.frames(), H = z.height(), W = z.width(), C = z.channels();
    const std::size_t D = config_.channels, P = patch_inputs();
    if (!(grad_features.shape() == Shape{F, H, W, D})) throw ShapeError("feature gradient shape mismatch");
    const auto half = static_cast<std::ptrdiff_t>(config_.patch / 2);

    Tensor4 grad(z.shape());
    // Appearance path: scatter W^T g into the clamped patch of every location.
    parallel_for(F, [&](std::size_t f) {
        std::vector<double> back(P);
        for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
                auto g = grad_features.pixel(f, r, c);
                std::fill(back.begin(), back.end(), 0.0);
                for (std::size_t d = 0; d < D; ++d) {
                    if (g[d] == 0.0) continue;
                    const double* w = projection_.data() + d * P;
                    for (std::size_t i = 0; i < P; ++i) back[i] += w[i] * g[d];
                }
                std::size_t k = 0;
                for (std::ptrdiff_t dr = -half; dr <= half; ++dr) {
                    const std::size_t rr = clamp_index(static_cast<std::ptrdiff_t>(r) + dr, H);
                    for (std::ptrdiff_t dc = -half; dc <= half; ++dc) {
                        const std::size_t cc = clamp_index(static_cast<std::ptrdiff_t>(c) + dc, W);
                        auto dst = grad.pixel(f, rr, cc);
                        for (std::size_t ch = 0; ch < C; ++ch) dst[ch] += back[k++];
                    }
                }
            }
        }
    });
    if (F < 2) return grad;

    const MotionState s = motion_forward(z, config_);
    const std::size_t HW = H * W, HWC = HW * C;
    const double gain = config_.motion_gain;

    std::vector<double> dnx(F * HW), dny(F * HW), dq(HW, 0.0);
    for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t p = 0; p < HW; ++p) {
            auto g = grad_features.pixel(f, p / W, p % W);
            double gmx = 0.0, gmy = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                gmx += motion_weights_[d][0] * g[d];
                gmy += motion_weights_[d][1] * g[d];
            }
            gmx *= gain;
            gmy *= gain;
            const std::size_t i = f * HW + p;
            const double q = s.pooled_energy[p];
            dnx[i] = gmx / q;
            dny[i] = gmy / q;
            dq[p] -= (gmx * s.mx[i] + gmy * s.my[i]) / q;
        }
    }
    const std::vector<double> dpx = window_sum_adjoint(dnx, F, H, W, config_.motion_window);
    const std::vector<double> dpy = window_sum_adjoint(dny, F, H, W, config_.motion_window);
    const std::vector<double> de = window_sum_adjoint(dq, 1, H, W, config_.motion_window);

    auto zv = z.values();
    auto gv = grad.values();
    std::vector<double> dgx(HWC, 0.0), dgy(HWC, 0.0), dzbar(HWC, 0.0);
    for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t p = 0; p < HW; ++p) {
            const double ax = dpx[f * HW + p], ay = dpy[f * HW + p];
            for (std::size_t ch = 0; ch < C; ++ch) {
                const std::size_t i = p * C + ch;
                const double res = zv[f * HWC + i] - s.zbar[i];
                const double dres = -(ax * s.gx[i] + ay * s.gy[i]);
                gv[f * HWC + i] += dres;
                dzbar[i] -= dres;
                dgx[i] -= ax * res;
                dgy[i] -= ay * res;
            }
        }
    }
    for (std::size_t p = 0; p < HW; ++p) {
        for (std::size_t ch = 0; ch < C; ++ch) {
            const std::size_t i = p * C + ch;
            dgx[i] += 2.0 * de[p] * s.gx[i];
            dgy[i] += 2.0 * de[p] * s.gy[i];
        }
    }
    for (std::size_t r = 0; r < H; ++r) {
        const std::size_t up = clamp_index(static_cast<std::ptrdiff_t>(r) - 1, H);
        const std::size_t dn = clamp_index(static_cast<std::ptrdiff_t>(r) + 1, H);
        for (std::size_t c = 0; c < W; ++c) {
            const std::size_t lf = clamp_index(static_cast<std::ptrdiff_t>(c) - 1, W);
            const std::size_t rt = clamp_index(static_cast<std::ptrdiff_t>(c) + 1, W);
            for (std::size_t ch = 0; ch < C; ++ch) {
                const std::size_t i = (r * W + c) * C + ch;
                dzbar[(r * W + rt) * C + ch] += 0.5 * dgx[i];
                dzbar[(r * W + lf) * C + ch] -= 0.5 * dgx[i];
                dzbar[(dn * W + c) * C + ch] += 0.5 * dgy[i];
                dzbar[(up * W + c) * C + ch] -= 0.5 * dgy[i];
            }
        }
    }
    const double inv_f = 1.0 / static_cast<double>(F);
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t i = 0; i < HWC; ++i) gv[f * HWC + i] += dzbar[i] * inv_f;
    return grad;
}

FeatureTensor featurize(const Tensor4& z, std::uint64_t seed) {
    return FeatureModel(z.channels(), seed).forward(z);
}

FeatureTensor featurize(const LatentVideo& z, std::uint64_t seed) { return featurize(z.z, seed); }

Tensor4 box_blur3(const Tensor4& z) {
    const std::size_t F = z.frames(), H = z.height(), W = z.width(), C = z.channels();
    Tensor4 out(z.shape());
    for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
                auto dst = out.pixel(f, r, c);
                for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
                    const std::size_t rr = clamp_index(static_cast<std::ptrdiff_t>(r) + dr, H);
                    for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
                        auto src = z.pixel(f, rr, clamp_index(static_cast<std::ptrdiff_t>(c) + dc, W));
                        for (std::size_t ch = 0; ch < C; ++ch) dst[ch] += src[ch];
                    }
                }
                for (double& v : dst) v /= 9.0;
            }
        }
    }
    return out;
}

} // namespace moft
