#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "moft/error.hpp"
#include "moft/io.hpp"
#include "moft/metrics.hpp"
#include "moft/random.hpp"
#include "moft/synth.hpp"

using namespace moft;

namespace {

Tracklet random_tracklet(Rng& rng, std::size_t frames) {
    Tracklet t;
    Point2 p{rng.uniform(0, 30), rng.uniform(0, 30)};
    t.points.push_back(p);
    for (std::size_t k = 1; k < frames; ++k) {
        p.row += rng.normal();
        p.col += rng.normal();
        t.points.push_back(p);
    }
    return t;
}

Tracklet negated(const Tracklet& t) {
    Tracklet out;
    for (const auto& p : t.points) out.points.push_back({-p.row, -p.col});
    return out;
}

// Cosine average written directly from the per-frame definition.
double oracle_corr(const Tracklet& a, const Tracklet& b) {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < a.frames(); ++k) {
        const double ux = a.points[k + 1].col - a.points[k].col, uy = a.points[k + 1].row - a.points[k].row;
        const double vx = b.points[k + 1].col - b.points[k].col, vy = b.points[k + 1].row - b.points[k].row;
        s += (ux * vx + uy * vy) / (std::sqrt(ux * ux + uy * uy) * std::sqrt(vx * vx + vy * vy));
    }
    return s / static_cast<double>(a.frames() - 1);
}

double oracle_fidelity(const TrackletSet& g, const TrackletSet& r) {
    double ref_term = 0.0, gen_term = 0.0;
    for (const auto& rj : r) {
        double best = -2.0;
        for (const auto& gi : g) best = std::max(best, oracle_corr(gi, rj));
        ref_term += best;
    }
    for (const auto& gi : g) {
        double best = -2.0;
        for (const auto& rj : r) best = std::max(best, oracle_corr(gi, rj));
        gen_term += best;
    }
    return ref_term / static_cast<double>(r.size()) + gen_term / static_cast<double>(g.size());
}

} // namespace

TEST_CASE("metric identities") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        TrackletSet set;
        for (int i = 0; i < 4; ++i) set.push_back(random_tracklet(rng, 8));
        CHECK(motion_fidelity(set, set) == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(tracklet_corr(set[0], negated(set[0])) == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(tracklet_corr(set[1], set[1]) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(mean_distance(set[2], set[2], 32, 32) == 0.0);
    }
}

TEST_CASE("fidelity matches the brute-force pairwise oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 25; ++trial) {
        TrackletSet g, r;
        for (int i = 0; i < 5; ++i) g.push_back(random_tracklet(rng, 10));
        for (int j = 0; j < 7; ++j) r.push_back(random_tracklet(rng, 10));
        CHECK(motion_fidelity(g, r) == doctest::Approx(oracle_fidelity(g, r)).epsilon(1e-6));
        CHECK(motion_fidelity(g, r) == doctest::Approx(motion_fidelity(r, g)).epsilon(1e-12));
        const double s = motion_fidelity(g, r);
        CHECK(s <= 2.0 + 1e-12);
        CHECK(s >= -2.0 - 1e-12);
    }
}

TEST_CASE("stationary frames") {
    Tracklet still{{{1, 1}, {1, 1}, {1, 1}}, {}};
    Tracklet moving{{{1, 1}, {1, 2}, {1, 3}}, {}};
    Tracklet half{{{1, 1}, {1, 1}, {1, 2}}, {}};
    CHECK_THROWS_AS(tracklet_corr(still, still), UndefinedCorrelationError);
    CHECK(tracklet_corr(still, moving) == 0.0);
    // Frame 1 is stationary in both and skipped; frame 2 matches.
    CHECK(tracklet_corr(half, Tracklet{{{0, 0}, {0, 0}, {0, 5}}, {}}) == doctest::Approx(1.0));
    CHECK(tracklet_corr(half, moving) == doctest::Approx(0.5));
    CHECK_THROWS_AS(motion_fidelity({still}, {still}), UndefinedCorrelationError);
    CHECK_THROWS_AS(motion_fidelity({}, {moving}), ArgumentError);
    CHECK_THROWS_AS(tracklet_corr(moving, Tracklet{{{0, 0}, {0, 1}}, {}}), ArgumentError);
}

TEST_CASE("mean distance and averaging") {
    const Tracklet a{{{0, 0}, {3, 4}}, {}};
    const Tracklet b{{{0, 0}, {0, 0}}, {}};
    CHECK(mean_distance(a, b, 30, 40) == doctest::Approx(2.5 / 50.0));
    CHECK(mean_distance(Tracklet{{{0, 0}}, {}}, Tracklet{{{300, 400}}, {}}, 30, 40) == 1.0);
    const Tracklet avg = average_tracklets({a, b});
    CHECK(avg.points[1] == Point2{1.5, 2.0});
    CHECK_THROWS_AS(average_tracklets({}), ArgumentError);
    CHECK_THROWS_AS(mean_distance(a, Tracklet{{{0, 0}}, {}}, 3, 3), ArgumentError);
    const Displacement m = mean_flow({a, b}, 0, 1);
    CHECK(m.dx == 2.0);
    CHECK(m.dy == 1.5);
    CHECK_THROWS_AS(mean_flow({a}, 1, 1), ArgumentError);
    CHECK(fidelity_display_scale(2.0) == 50.0);
    CHECK(fidelity_display_scale(-2.0) == 0.0);
}

TEST_CASE("tracker follows integer and sub-pixel pans") {
    SceneSpec scene;
    scene.seed = 9;
    SUBCASE("integer pan is recovered exactly") {
        const LatentVideo v = generate_panning_video(scene, constant_pattern({2.0, -1.0}, 16));
        const TrackletSet ts = track(v.z, {{10, 10}, {20, 5}});
        for (const auto& t : ts)
            for (std::size_t k = 0; k < 15; ++k) CHECK(t.step(k) == Displacement{2.0, -1.0});
    }
    SUBCASE("half-pixel pan lands within a quarter pixel") {
        const LatentVideo v = generate_panning_video(scene, constant_pattern({0.5, 0.0}, 16));
        const TrackletSet ts = track(v.z, {{16, 16}});
        const Displacement m = mean_flow(ts, 0, 15);
        CHECK(std::abs(m.dx - 0.5) < 0.25);
        CHECK(std::abs(m.dy) < 0.25);
    }
    SUBCASE("static video stays put") {
        const LatentVideo v = generate_panning_video(scene, named_pattern("static", 16, 1.0));
        const TrackletSet ts = track(v.z, {{3, 3}});
        for (const auto& p : ts[0].points) CHECK(p == Point2{3, 3});
    }
    SUBCASE("flat input is flagged") {
        const TrackletSet ts = track(Tensor4(Shape{4, 8, 8, 2}, 0.5), {{3, 3}});
        CHECK(ts[0].flat == std::vector<bool>{true, true, true});
    }
    CHECK_THROWS_AS(track(Tensor4(Shape{2, 8, 8, 1}), {{9, 0}}), ArgumentError);
    CHECK_THROWS_AS(track(Tensor4(Shape{2, 8, 8, 1}), {{1, 1}}, {4, 3}), ArgumentError);
}

TEST_CASE("tracklet text round trip") {
    Rng rng(5);
    const TrackletSet set{random_tracklet(rng, 4), random_tracklet(rng, 4)};
    const TrackletSet back = parse_tracklets(format_tracklets(set));
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(back[i].points[k].row == doctest::Approx(set[i].points[k].row).epsilon(1e-12));
            CHECK(back[i].points[k].col == doctest::Approx(set[i].points[k].col).epsilon(1e-12));
        }
    CHECK(parse_tracklets("1,2 3,4\n").front().points[1] == Point2{4, 3}); // x,y order
    CHECK_THROWS_AS(parse_tracklets("1,2 3\n"), FormatError);
    CHECK_THROWS_AS(parse_tracklets("1,2 3,4\n1,2\n"), FormatError);
    CHECK_THROWS_AS(parse_tracklets("1,z\n"), FormatError);
    const auto dir = std::filesystem::temp_directory_path() / "moft_tracklet_test";
    std::filesystem::create_directories(dir);
    save_tracklets(set, dir / "t.txt");
    CHECK(load_tracklets(dir / "t.txt").size() == 2);
}
