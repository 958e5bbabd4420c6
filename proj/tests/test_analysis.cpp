#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "moft/analysis.hpp"
#include "moft/error.hpp"
#include "moft/featurize.hpp"
#include "moft/random.hpp"

using namespace moft;

namespace {

const std::vector<LabeledTensor>& small_set() {
    static const std::vector<LabeledTensor> set = [] {
        std::vector<MotionPattern> dirs;
        for (const char* n : {"right", "left", "down", "up"}) dirs.push_back(named_pattern(n, 16, 1.0));
        return build_calibration_set(dirs, 8, 5);
    }();
    return set;
}

Tensor4 random_tensor(Rng& rng, Shape s) {
    Tensor4 t(s);
    for (double& v : t.values()) v = rng.normal();
    return t;
}

} // namespace

TEST_CASE("pca on a 2-d cloud matches the closed-form eigenpairs") {
    Rng rng(11);
    std::vector<Vector> samples;
    for (int i = 0; i < 400; ++i) {
        const double a = 3.0 * rng.normal(), b = 0.5 * rng.normal();
        samples.push_back({1.0 + 0.8 * a - 0.6 * b, -2.0 + 0.6 * a + 0.8 * b});
    }
    const PcaModel m = fit_pca(samples, 2);

    // Oracle: sample covariance and the 2x2 symmetric eigen formula.
    double mx = 0, my = 0;
    for (const auto& s : samples) {
        mx += s[0];
        my += s[1];
    }
    mx /= 400;
    my /= 400;
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& s : samples) {
        sxx += (s[0] - mx) * (s[0] - mx);
        syy += (s[1] - my) * (s[1] - my);
        sxy += (s[0] - mx) * (s[1] - my);
    }
    const double tr = (sxx + syy) / 399, det = (sxx * syy - sxy * sxy) / (399.0 * 399.0);
    const double l1 = tr / 2 + std::sqrt(tr * tr / 4 - det), l2 = tr / 2 - std::sqrt(tr * tr / 4 - det);
    CHECK(m.mean[0] == doctest::Approx(mx).epsilon(1e-12));
    CHECK(m.explained_variance[0] == doctest::Approx(l1).epsilon(1e-9));
    CHECK(m.explained_variance[1] == doctest::Approx(l2).epsilon(1e-9));

    Vector v1{sxy / 399, l1 - sxx / 399};
    const double n1 = std::hypot(v1[0], v1[1]);
    const double dominant = std::abs(v1[0]) >= std::abs(v1[1]) ? v1[0] : v1[1];
    if (dominant < 0) v1 = {-v1[0], -v1[1]};
    CHECK(m.components[0][0] == doctest::Approx(v1[0] / n1).epsilon(1e-9));
    CHECK(m.components[0][1] == doctest::Approx(v1[1] / n1).epsilon(1e-9));
}

TEST_CASE("pca components are orthonormal with positive dominant entries") {
    Rng rng(4);
    std::vector<Vector> samples(30, Vector(6));
    for (auto& s : samples)
        for (double& v : s) v = rng.normal();
    const PcaModel m = fit_pca(samples, 4);
    CHECK(m.components.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& c = m.components[i];
        const auto big = std::max_element(c.begin(), c.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
        CHECK(*big > 0.0);
        for (std::size_t j = 0; j < 4; ++j) {
            const double dot = std::inner_product(c.begin(), c.end(), m.components[j].begin(), 0.0);
            CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).scale(1.0).epsilon(1e-10));
        }
        if (i > 0) CHECK(m.explained_variance[i] <= m.explained_variance[i - 1]);
    }
}

TEST_CASE("projection round trip with a full basis") {
    Rng rng(8);
    std::vector<Vector> samples(12, Vector(4));
    for (auto& s : samples)
        for (double& v : s) v = rng.uniform(-1, 1);
    const PcaModel m = fit_pca(samples, 4);
    for (const auto& s : samples) {
        const Vector back = reconstruct(m, project(m, s, 4));
        for (std::size_t d = 0; d < 4; ++d) CHECK(back[d] == doctest::Approx(s[d]).epsilon(1e-10));
    }
}

TEST_CASE("pca argument checks") {
    CHECK_THROWS_AS(fit_pca({}, 1), ArgumentError);
    CHECK_THROWS_AS(fit_pca({{1, 2}, {3, 4}}, 3), ArgumentError);
    CHECK_THROWS_AS(fit_pca({{1, 2}, {3}}, 1), ShapeError);
    CHECK_THROWS_AS(fit_pca({{1, 2}, {3, NAN}}, 1), DataError);
    const PcaModel m = fit_pca({{1, 2}, {3, 5}, {0, 1}}, 1);
    CHECK_THROWS_AS(project(m, {1, 2}, 2), ArgumentError);
    CHECK_THROWS_AS(project(m, {1, 2, 3}, 1), ShapeError);
}

TEST_CASE("nearest centroid accuracy") {
    const std::vector<Vector> pts{{0, 0}, {0, 1}, {10, 0}, {10, 1}, {9.9, 0.5}};
    CHECK(nearest_centroid_accuracy(pts, {"a", "a", "b", "b", "b"}) == 1.0);
    CHECK(nearest_centroid_accuracy(pts, {"a", "b", "a", "b", "a"}) == doctest::Approx(0.6));
    CHECK_THROWS_AS(nearest_centroid_accuracy(pts, {"a"}), ArgumentError);
}

TEST_CASE("channel ranking by first loading") {
    PcaModel m;
    m.mean = Vector(5, 0.0);
    m.components = {{0.1, -0.7, 0.7, 0.05, 0.0}};
    m.explained_variance = {1.0};
    Rng rng(2);
    std::vector<FeatureTensor> cal{random_tensor(rng, Shape{4, 3, 3, 5}), random_tensor(rng, Shape{4, 3, 3, 5})};
    const MotionChannelProfile p = rank_motion_channels(m, cal, 0.4);
    REQUIRE(p.size() == 2);
    // Equal magnitudes keep ascending index order.
    CHECK(p.channels == std::vector<std::size_t>{1, 2});
    CHECK(p.loading[0] == 0.7); // magnitude
    CHECK(p.feature_channels == 5);

    // Stats oracle: extrema of the spatially pooled centered trace.
    for (std::size_t i = 0; i < 2; ++i) {
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& t : cal) {
            std::vector<double> tr(4, 0.0);
            for (std::size_t f = 0; f < 4; ++f)
                for (std::size_t r = 0; r < 3; ++r)
                    for (std::size_t c = 0; c < 3; ++c) tr[f] += t.at(f, r, c, p.channels[i]) / 9.0;
            const double mean = std::accumulate(tr.begin(), tr.end(), 0.0) / 4.0;
            for (double v : tr) {
                lo = std::min(lo, v - mean);
                hi = std::max(hi, v - mean);
            }
        }
        CHECK(p.stat_min[i] == doctest::Approx(lo).epsilon(1e-12));
        CHECK(p.stat_max[i] == doctest::Approx(hi).epsilon(1e-12));
    }
    CHECK(rank_motion_channels(m, cal, 0.01).size() == 1);
    CHECK(rank_motion_channels(m, cal, 1.0).size() == 5);
    CHECK_THROWS_AS(rank_motion_channels(m, cal, 0.0), ArgumentError);
    CHECK_THROWS_AS(rank_motion_channels(m, {}, 0.4), ArgumentError);
}

TEST_CASE("calibrated profile picks the dedicated motion channels") {
    PcaModel model;
    const MotionChannelProfile p = calibrate_profile(small_set(), {0.04, 2, false}, &model);
    CHECK(p.size() == 3);
    CHECK(p.has_statistics());
    CHECK(model.components.size() == 2);
    const FeatureModel fm(4, 0);
    for (std::size_t c : p.channels)
        CHECK(std::find(fm.motion_channels().begin(), fm.motion_channels().end(), c) != fm.motion_channels().end());
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p.stat_min[i] < 0.0);
        CHECK(p.stat_max[i] > 0.0);
        CHECK(std::hypot(p.axis[i].dx, p.axis[i].dy) == doctest::Approx(1.0));
    }
    // Speed 1 over 16 frames: cumulative 0..15, centered extremes at 7.5.
    CHECK(p.excursion == doctest::Approx(7.5));
    const MotionChannelProfile again = calibrate_profile(small_set(), {});
    CHECK(again.to_text() == p.to_text());
}

TEST_CASE("pooled samples") {
    const auto first = pooled_samples(small_set(), true);
    const auto all = pooled_samples(small_set(), true, true);
    CHECK(first.size() == 32);
    CHECK(all.size() == 32 * 16);
    CHECK(first[0].size() == 64);
    // Normalized samples of one video sum to zero over its frames.
    for (std::size_t d = 0; d < 64; ++d) {
        double s = 0;
        for (std::size_t f = 0; f < 16; ++f) s += all[f][d];
        CHECK(std::abs(s) < 1e-9);
    }
}

TEST_CASE("traces") {
    Rng rng(6);
    const Tensor4 t = random_tensor(rng, Shape{5, 4, 3, 2});
    const Vector tr = channel_trace(t, 1, {2, 1});
    for (std::size_t f = 0; f < 5; ++f) CHECK(tr[f] == t.at(f, 2, 1, 1));
    CHECK_THROWS_AS(channel_trace(t, 2, {0, 0}), ArgumentError);
    CHECK_THROWS_AS(channel_trace(t, 0, {4, 0}), ArgumentError);
    CHECK_THROWS_AS(channel_trace(t, 0, {0.5, 0}), ArgumentError);

    RegionMask mask = RegionMask::full(4, 3, 5);
    std::fill(mask.inside.begin(), mask.inside.end(), 0);
    mask.inside[0] = mask.inside[5] = 1;
    const Vector rt = region_trace(t, 0, &mask);
    for (std::size_t f = 0; f < 5; ++f) CHECK(rt[f] == doctest::Approx((t.at(f, 0, 0, 0) + t.at(f, 1, 2, 0)) / 2));
    const Vector whole = region_trace(t, 0);
    double s = 0;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) s += t.at(3, r, c, 0);
    CHECK(whole[3] == doctest::Approx(s / 12));
    std::fill(mask.inside.begin(), mask.inside.end(), 0);
    CHECK_THROWS_AS(region_trace(t, 0, &mask), ArgumentError);
}

TEST_CASE("cosine maps") {
    Rng rng(9);
    const Tensor4 ref = random_tensor(rng, Shape{3, 5, 4, 2});
    const Map2 self = cosine_map(ref, {1, 2}, ref);
    CHECK(self.at(1, 2) == doctest::Approx(1.0));
    for (double v : self.values) {
        CHECK(v <= 1.0 + 1e-12);
        CHECK(v >= -1.0 - 1e-12);
    }
    // Scalar oracle at one location.
    double dot = 0, na = 0, nb = 0;
    for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t d = 0; d < 2; ++d) {
            dot += ref.at(f, 1, 2, d) * ref.at(f, 4, 0, d);
            na += ref.at(f, 1, 2, d) * ref.at(f, 1, 2, d);
            nb += ref.at(f, 4, 0, d) * ref.at(f, 4, 0, d);
        }
    CHECK(self.at(4, 0) == doctest::Approx(dot / std::sqrt(na * nb)));

    Tensor4 target = ref;
    for (std::size_t f = 0; f < 3; ++f)
        for (double& v : target.pixel(f, 0, 0)) v = 0.0;
    CHECK(cosine_map(ref, {1, 2}, target).at(0, 0) == 0.0);
    CHECK_THROWS_AS(cosine_map(target, {0, 0}, ref), DegenerateReferenceError);
    CHECK_THROWS_AS(cosine_map(ref, {5, 0}, ref), ArgumentError);
    CHECK_THROWS_AS(cosine_map(ref, {0, 0}, Tensor4(Shape{2, 5, 4, 2})), ShapeError);
}

TEST_CASE("map helpers") {
    Map2 m{2, 3, {0.5, 2.0, -1.0, 2.0, 0.0, 1.0}};
    CHECK(m.argmax() == Point2{0, 1});
    CHECK(m.mean() == doctest::Approx(0.75));
    const Map2 n = normalize_map(m);
    CHECK(n.at(0, 2) == 0.0);
    CHECK(n.at(0, 1) == 1.0);
    CHECK(n.at(0, 0) == doctest::Approx(0.5));
    const Map2 flat = normalize_map(Map2{1, 2, {3.0, 3.0}});
    CHECK(flat.values == Vector{1.0, 1.0});
}

TEST_CASE("noise probe at zero noise localizes exactly") {
    const MotionChannelProfile p = calibrate_profile(small_set(), {});
    SceneSpec scene;
    scene.seed = 3;
    const LatentVideo v = generate_warp_video(scene, 2.0);
    const auto levels = probe_noise_robustness(v, {0.0}, p, 1, {17, 9});
    REQUIRE(levels.size() == 1);
    CHECK(levels[0].moft_error == 0.0);
    CHECK(levels[0].vanilla_error == 0.0);
    CHECK_THROWS_AS(probe_noise_robustness(v, {1.5}, p, 1, {7, 9}), ArgumentError);
}
