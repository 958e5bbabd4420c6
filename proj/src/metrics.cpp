#include "moft/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "moft/io.hpp"
#include "moft/parallel.hpp"
#include "moft/synth.hpp"

namespace moft {
namespace {

// Window of frame f centered at (row, col), toroidal, all channels, mean removed.
// Returns the window's L2 norm after centering.
double gather_window(const Tensor4& v, std::size_t f, double row, double col, std::size_t side, std::vector<double>& out) {
    const auto half = static_cast<int>(side / 2);
    out.clear();
    for (int dr = -half; dr <= half; ++dr)
        for (int dc = -half; dc <= half; ++dc)
            for (std::size_t ch = 0; ch < v.channels(); ++ch) out.push_back(sample_wrapped(v, f, row + dr, col + dc, ch));
    double mean = 0.0;
    for (double x : out) mean += x;
    mean /= static_cast<double>(out.size());
    double ss = 0.0;
    for (double& x : out) {
        x -= mean;
        ss += x * x;
    }
    return std::sqrt(ss);
}

double parabola_offset(double left, double mid, double right) {
    const double denom = left - 2.0 * mid + right;
    if (!(denom < 0.0)) return 0.0;
    return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

} // namespace

Displacement Tracklet::step(std::size_t k) const {
    return {points[k + 1].col - points[k].col, points[k + 1].row - points[k].row};
}

TrackletSet track(const Tensor4& video, const std::vector<Point2>& seeds, const TrackerConfig& cfg) {
    if (cfg.window % 2 == 0 || cfg.window == 0) throw ArgumentError("tracker window must be odd");
    if (cfg.radius < 0) throw ArgumentError("tracker radius must be >= 0");
    for (const auto& s : seeds)
        if (!(s.row >= 0 && s.col >= 0 && s.row < static_cast<double>(video.height()) &&
              s.col < static_cast<double>(video.width())))
            throw ArgumentError("tracker seed outside the domain");
    TrackletSet out(seeds.size());
    const int R = cfg.radius;
    const auto side = static_cast<std::size_t>(2 * R + 1);
    parallel_for(seeds.size(), [&](std::size_t i) {
        Tracklet& tr = out[i];
        tr.points.push_back(seeds[i]);
        std::vector<double> a, b;
        std::vector<double> score(side * side);
        for (std::size_t f = 0; f + 1 < video.frames(); ++f) {
            const Point2 p = tr.points.back();
            const double na = gather_window(video, f, p.row, p.col, cfg.window, a);
            if (na == 0.0) {
                tr.points.push_back(p);
                tr.flat.push_back(true);
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            int bdr = 0, bdc = 0;
            for (int dr = -R; dr <= R; ++dr)
                for (int dc = -R; dc <= R; ++dc) {
                    const double nb = gather_window(video, f + 1, p.row + dr, p.col + dc, cfg.window, b);
                    double s = -1.0;
                    if (nb > 0.0) {
                        double dot = 0.0;
                        for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
                        s = dot / (na * nb);
                    }
                    score[static_cast<std::size_t>((dr + R) * static_cast<int>(side) + dc + R)] = s;
                    // Prefer the smallest displacement among exact ties.
                    if (s > best || (s == best && dr * dr + dc * dc < bdr * bdr + bdc * bdc)) {
                        best = s;
                        bdr = dr;
                        bdc = dc;
                    }
                }
            double sr = 0.0, sc = 0.0;
            if (best < 1.0 - 1e-9) {
                auto at = [&](int dr, int dc) { return score[static_cast<std::size_t>((dr + R) * static_cast<int>(side) + dc + R)]; };
                if (bdr > -R && bdr < R) sr = parabola_offset(at(bdr - 1, bdc), best, at(bdr + 1, bdc));
                if (bdc > -R && bdc < R) sc = parabola_offset(at(bdr, bdc - 1), best, at(bdr, bdc + 1));
            }
            tr.points.push_back({p.row + bdr + sr, p.col + bdc + sc});
            tr.flat.push_back(false);
        }
    });
    return out;
}

double tracklet_corr(const Tracklet& a, const Tracklet& b) {
    if (a.frames() != b.frames()) throw ArgumentError("tracklets differ in frame count");
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k + 1 < a.frames(); ++k) {
        const Displacement u = a.step(k), v = b.step(k);
        const double nu = std::hypot(u.dx, u.dy), nv = std::hypot(v.dx, v.dy);
        if (nu == 0.0 && nv == 0.0) continue;
        ++used;
        if (nu == 0.0 || nv == 0.0) continue; // cosine taken as 0
        sum += (u.dx * v.dx + u.dy * v.dy) / (nu * nv);
    }
    if (used == 0) throw UndefinedCorrelationError("every frame of both tracklets is stationary");
    return sum / static_cast<double>(used);
}

double motion_fidelity(const TrackletSet& generated, const TrackletSet& reference) {
    if (generated.empty() || reference.empty()) throw ArgumentError("tracklet sets must be nonempty");
    const std::size_t n = generated.size(), m = reference.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> corr(n * m, nan);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            try {
                corr[i * m + j] = tracklet_corr(generated[i], reference[j]);
                any = true;
            } catch (const UndefinedCorrelationError&) {
            }
        }
    if (!any) throw UndefinedCorrelationError("every tracklet pairing is degenerate");
    auto best = [&](std::size_t count, auto&& value) {
        double total = 0.0;
        std::size_t used = 0;
        for (std::size_t a = 0; a < count; ++a) {
            double b = -std::numeric_limits<double>::infinity();
            bool found = false;
            value(a, b, found);
            if (found) {
                total += b;
                ++used;
            }
        }
        return used ? total / static_cast<double>(count) : 0.0;
    };
    const double ref_term = best(m, [&](std::size_t j, double& b, bool& found) {
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isnan(corr[i * m + j])) {
                b = std::max(b, corr[i * m + j]);
                found = true;
            }
    });
    const double gen_term = best(n, [&](std::size_t i, double& b, bool& found) {
        for (std::size_t j = 0; j < m; ++j)
            if (!std::isnan(corr[i * m + j])) {
                b = std::max(b, corr[i * m + j]);
                found = true;
            }
    });
    return ref_term + gen_term;
}

double fidelity_display_scale(double score) { return 50.0 * (score + 2.0) / 4.0; }

double mean_distance(const Tracklet& edited, const Tracklet& target, std::size_t height, std::size_t width) {
    if (edited.frames() != target.frames()) throw ArgumentError("tracklets differ in frame count");
    if (edited.frames() == 0) throw ArgumentError("empty tracklet");
    double sum = 0.0;
    for (std::size_t k = 0; k < edited.frames(); ++k)
        sum += std::hypot(edited.points[k].row - target.points[k].row, edited.points[k].col - target.points[k].col);
    const double diag = std::hypot(static_cast<double>(height), static_cast<double>(width));
    return std::min(1.0, sum / static_cast<double>(edited.frames()) / diag);
}

Tracklet average_tracklets(const TrackletSet& set) {
    if (set.empty()) throw ArgumentError("cannot average an empty tracklet set");
    const std::size_t F = set.front().frames();
    Tracklet out;
    out.points.assign(F, {0.0, 0.0});
    for (const auto& t : set) {
        if (t.frames() != F) throw ArgumentError("tracklets differ in frame count");
        for (std::size_t k = 0; k < F; ++k) {
            out.points[k].row += t.points[k].row;
            out.points[k].col += t.points[k].col;
        }
    }
    for (auto& p : out.points) {
        p.row /= static_cast<double>(set.size());
        p.col /= static_cast<double>(set.size());
    }
    return out;
}

Displacement mean_flow(const TrackletSet& set, std::size_t first, std::size_t last) {
    Displacement m;
    std::size_t n = 0;
    for (const auto& t : set)
        for (std::size_t k = first; k < last && k + 1 < t.frames(); ++k) {
            const Displacement d = t.step(k);
            m.dx += d.dx;
            m.dy += d.dy;
            ++n;
        }
    if (n == 0) throw ArgumentError("no tracklet steps in range");
    m.dx /= static_cast<double>(n);
    m.dy /= static_cast<double>(n);
    return m;
}

std::string format_tracklets(const TrackletSet& set) {
    auto num = [](double v) {
        char buf[32];
        return std::string(buf, std::to_chars(buf, buf + sizeof buf, v == 0.0 ? 0.0 : v).ptr);
    };
    std::string out;
    for (const auto& t : set) {
        for (std::size_t k = 0; k < t.frames(); ++k)
            out += (k ? " " : "") + num(t.points[k].col) + ',' + num(t.points[k].row);
        out += '\n';
    }
    return out;
}

TrackletSet parse_tracklets(const std::string& text) {
    TrackletSet out;
    std::istringstream in(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        Tracklet t;
        for (std::string tok; ls >> tok;) {
            const auto comma = tok.find(',');
            if (comma == std::string::npos) throw FormatError("tracklets line " + std::to_string(line_no) + ": bad point '" + tok + "'");
            try {
                std::size_t ux = 0, uy = 0;
                const std::string xs = tok.substr(0, comma), ys = tok.substr(comma + 1);
                const double x = std::stod(xs, &ux), y = std::stod(ys, &uy);
                if (ux != xs.size() || uy != ys.size() || !std::isfinite(x) || !std::isfinite(y)) throw std::invalid_argument(tok);
                t.points.push_back({y, x});
            } catch (const std::exception&) {
                throw FormatError("tracklets line " + std::to_string(line_no) + ": bad point '" + tok + "'");
            }
        }
        out.push_back(std::move(t));
    }
    if (!out.empty())
        for (const auto& t : out)
            if (t.frames() != out.front().frames()) throw FormatError("tracklets differ in frame count");
    return out;
}

TrackletSet load_tracklets(const std::filesystem::path& path) { return parse_tracklets(read_text(path)); }

void save_tracklets(const TrackletSet& set, const std::filesystem::path& path) { write_text(path, format_tracklets(set)); }

} // namespace moft
