#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "moft/analysis.hpp"
#include "moft/config.hpp"
#include "moft/featurize.hpp"
#include "moft/guidance.hpp"
#include "moft/io.hpp"
#include "moft/metrics.hpp"
#include "moft/moft.hpp"
#include "moft/random.hpp"
#include "moft/synth.hpp"

namespace fs = std::filesystem;
using namespace moft;

namespace {

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;

    // synth
    std::string patterns;
    std::string out;
    // calibrate
    std::string manifest;
    // extract
    std::string input;
    std::string profile;
    bool input_is_features = false;
    std::string trace_csv;
    std::string mask;
    std::string point;
    // heatmap
    std::string ref;
    std::string target;
    // synth-ref / guide
    std::string schedule;
    std::string init;
    std::string log;
    // drag
    std::string start;
    std::string drag_target;
    // fidelity
    std::string generated;
    std::string reference;
    std::string video;
    bool display = false;
};

RunConfig resolve_config(const Options& o) {
    RunConfig cfg = o.config_path.empty() ? RunConfig() : RunConfig::load(o.config_path);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

Point2 parse_point(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw ArgumentError("point must be 'row,col', got '" + text + "'");
    try {
        return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    } catch (const std::exception&) {
        throw ArgumentError("point must be 'row,col', got '" + text + "'");
    }
}

SceneSpec scene_from(const RunConfig& cfg) {
    SceneSpec s;
    s.height = static_cast<std::size_t>(cfg.get_int("height"));
    s.width = static_cast<std::size_t>(cfg.get_int("width"));
    s.frames = static_cast<std::size_t>(cfg.get_int("frames"));
    s.latent_channels = static_cast<std::size_t>(cfg.get_int("latent_channels"));
    s.octaves = static_cast<std::size_t>(cfg.get_int("octaves"));
    return s;
}

GuidanceConfig guidance_from(const RunConfig& cfg) {
    GuidanceConfig g;
    g.steps = static_cast<int>(cfg.get_int("steps"));
    g.lr = cfg.get_double("lr");
    g.inner_iters = static_cast<int>(cfg.get_int("inner_iters"));
    g.t1 = static_cast<int>(cfg.get_int("t1"));
    g.t2 = static_cast<int>(cfg.get_int("t2"));
    g.t3 = static_cast<int>(cfg.get_int("t3"));
    g.wc = cfg.get_double("wc");
    g.wp = cfg.get_double("wp");
    g.clip_frames = cfg.get_index_list("clip_frames");
    g.seed = cfg.get_seed("feature_seed");
    g.denoise_blend = cfg.get_double("denoise_blend");
    return g;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

struct ManifestEntry {
    fs::path path;
    MotionPattern pattern;
};

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::vector<ManifestEntry> out;
    std::istringstream in(read_text(path));
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string tok; std::getline(ls, tok, ',');) f.push_back(tok);
        if (f.size() < 2 || f.size() % 2 != 0)
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected path,label,dx,dy,...");
        ManifestEntry e;
        e.path = fs::path(f[0]).is_absolute() ? fs::path(f[0]) : path.parent_path() / f[0];
        e.pattern.label = f[1];
        try {
            for (std::size_t i = 2; i < f.size(); i += 2) e.pattern.steps.push_back({std::stod(f[i]), std::stod(f[i + 1])});
        } catch (const std::exception&) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": bad displacement");
        }
        out.push_back(std::move(e));
    }
    if (out.empty()) throw FormatError("manifest is empty");
    return out;
}

RegionMask mask_or_full(const std::string& path, const Tensor4& like) {
    if (path.empty()) return RegionMask::full(like.height(), like.width(), like.frames());
    RegionMask m = load_mask_pgm(path, like.frames());
    if (m.height != like.height() || m.width != like.width()) throw ShapeError("mask size does not match the video");
    return m;
}

void write_log(const std::vector<StepLog>& log, const fs::path& path) {
    std::ostringstream os;
    os.precision(10);
    os << "step,wc,wp,loss_motion,loss_drag\n";
    for (const auto& e : log) os << e.step << ',' << e.wc << ',' << e.wp << ',' << e.motion << ',' << e.drag << '\n';
    write_text(path, os.str());
}

fs::path output_dir(const std::string& out) {
    const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
    fs::create_directories(dir);
    return dir;
}

int run_synth(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    const SceneSpec geometry = scene_from(cfg);
    const double speed = cfg.get_double("speed");
    const auto names = split_list(o.patterns.empty() ? cfg.get("directions") : o.patterns);
    const fs::path dir = output_dir(o.out);
    const auto scenes = static_cast<std::size_t>(cfg.get_int("scenes"));
    const std::uint64_t seed = cfg.get_seed("seed");
    std::ostringstream manifest;
    manifest.precision(17);
    std::uint64_t tag = 0;
    std::vector<MotionPattern> patterns;
    if (!o.schedule.empty()) {
        patterns.push_back({parse_schedule(o.schedule, speed).steps, "custom"});
    } else {
        for (const auto& name : names) patterns.push_back(named_pattern(name, geometry.frames, speed));
    }
    for (const auto& p : patterns) {
        for (std::size_t s = 0; s < scenes; ++s) {
            SceneSpec scene = geometry;
            scene.frames = p.steps.size() + 1;
            scene.seed = derive_seed(seed, tag++);
            const LatentVideo v = generate_panning_video(scene, p);
            char name_buf[64];
            std::snprintf(name_buf, sizeof name_buf, "video_%03llu.mft", static_cast<unsigned long long>(tag - 1));
            save_tensor(v.z, dir / name_buf);
            manifest << name_buf << ',' << p.label;
            for (const auto& d : p.steps) manifest << ',' << d.dx << ',' << d.dy;
            manifest << '\n';
        }
    }
    write_text(dir / "manifest.txt", manifest.str());
    cfg.echo(dir);
    std::cout << "wrote " << tag << " videos to " << dir.string() << '\n';
    return 0;
}

int run_calibrate(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    const auto entries = read_manifest(o.manifest);
    const std::uint64_t fseed = cfg.get_seed("feature_seed");
    std::vector<LabeledTensor> set;
    for (const auto& e : entries) {
        LatentVideo v{load_tensor(e.path), 0};
        if (e.pattern.steps.size() + 1 != v.z.frames())
            throw DataError("manifest displacements do not match frames of " + e.path.string());
        FeatureTensor f = featurize(v, fseed);
        set.push_back({std::move(f), e.pattern.label, e.pattern, std::move(v)});
    }
    CalibrationOptions opts;
    opts.fraction = cfg.get_double("q");
    opts.num_components = static_cast<std::size_t>(cfg.get_int("components"));
    opts.all_frames = cfg.get_int("pca_all_frames") != 0;
    PcaModel model;
    const MotionChannelProfile profile = calibrate_profile(set, opts, &model);
    const fs::path out = o.out.empty() ? fs::path("profile.txt") : fs::path(o.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_profile(profile, out);
    // 2-D projections of the normalized first-frame samples, for plotting.
    std::ostringstream csv;
    csv.precision(10);
    csv << "label,pc1,pc2\n";
    const auto samples = pooled_samples(set, true, opts.all_frames);
    const std::size_t per_video = opts.all_frames ? set.front().features.frames() : 1;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto p = project(model, samples[i], std::min<std::size_t>(2, model.components.size()));
        csv << set[i / per_video].label << ',' << p[0] << ',' << (p.size() > 1 ? p[1] : 0.0) << '\n';
    }
    const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
    write_text(dir / (out.stem().string() + "_pca.csv"), csv.str());
    cfg.echo(dir);
    std::cout << "profile " << profile.id() << " with " << profile.size() << " channels written to " << out.string() << '\n';
    return 0;
}

int run_extract(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    const MotionChannelProfile profile = load_profile(o.profile);
    const Tensor4 input = load_tensor(o.input);
    const FeatureTensor features = o.input_is_features ? input : featurize(input, cfg.get_seed("feature_seed"));
    const Moft m = extract_moft(features, profile);
    const fs::path out = o.out.empty() ? fs::path("moft.mft") : fs::path(o.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_moft(m, out);
    if (!o.trace_csv.empty()) {
        const FeatureTensor norm = content_removal(features);
        std::optional<RegionMask> mask;
        if (!o.mask.empty()) mask = mask_or_full(o.mask, norm);
        std::ostringstream csv;
        csv.precision(10);
        csv << "frame";
        for (std::size_t c : profile.channels) csv << ",ch" << c;
        csv << '\n';
        std::vector<Vector> traces;
        for (std::size_t c : profile.channels)
            traces.push_back(o.point.empty() ? region_trace(norm, c, mask ? &*mask : nullptr)
                                             : channel_trace(norm, c, parse_point(o.point)));
        for (std::size_t f = 0; f < norm.frames(); ++f) {
            csv << f + 1;
            for (const auto& t : traces) csv << ',' << t[f];
            csv << '\n';
        }
        write_text(o.trace_csv, csv.str());
    }
    cfg.echo(out.has_parent_path() ? out.parent_path() : fs::path("."));
    std::cout << "moft " << m.frames() << "x" << m.height() << "x" << m.width() << "x" << m.size() << " written to "
              << out.string() << '\n';
    return 0;
}

int run_heatmap(const Options& o) {
    const Moft ref = load_moft(o.ref);
    const Moft target = load_moft(o.target);
    if (ref.channels != target.channels) throw ProfileMismatchError("reference and target use different channels");
    const Map2 map = similarity_heatmap(ref, parse_point(o.point), target);
    const fs::path prefix = o.out.empty() ? fs::path("heatmap") : fs::path(o.out);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    save_map_pgm(map.values, map.height, map.width, prefix.string() + ".pgm");
    save_map_csv(map.values, map.height, map.width, prefix.string() + ".csv");
    const Point2 peak = map.argmax();
    std::cout << "peak " << peak.row << "," << peak.col << '\n';
    return 0;
}

int run_synth_ref(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    const MotionChannelProfile profile = load_profile(o.profile);
    const DirectionSchedule schedule = parse_schedule(o.schedule, cfg.get_double("schedule_speed"));
    const Moft m = synthesize_reference_moft(schedule, profile, schedule.steps.size() + 1,
                                             static_cast<std::size_t>(cfg.get_int("height")),
                                             static_cast<std::size_t>(cfg.get_int("width")));
    const fs::path out = o.out.empty() ? fs::path("ref.mft") : fs::path(o.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_moft(m, out);
    cfg.echo(out.has_parent_path() ? out.parent_path() : fs::path("."));
    std::cout << "reference moft written to " << out.string() << '\n';
    return 0;
}

Moft reference_for(const Options& o, const RunConfig& cfg, const MotionChannelProfile& profile, const Tensor4& z,
                   const std::optional<DragSpec>& drag) {
    if (!o.ref.empty()) return load_moft(o.ref);
    DirectionSchedule schedule;
    if (!o.schedule.empty()) {
        schedule = parse_schedule(o.schedule, cfg.get_double("schedule_speed"));
    } else if (drag) {
        const double n = static_cast<double>(z.frames() - 1);
        schedule.steps.assign(z.frames() - 1, {(drag->target.col - drag->start.col) / n,
                                               (drag->target.row - drag->start.row) / n});
    } else {
        throw ArgumentError("one of --ref or --schedule is required");
    }
    return synthesize_reference_moft(schedule, profile, z.frames(), z.height(), z.width());
}

int run_guide(const Options& o, bool with_drag) {
    const RunConfig cfg = resolve_config(o);
    const MotionChannelProfile profile = load_profile(o.profile);
    const LatentVideo init{load_tensor(o.init), cfg.get_seed("seed")};
    std::optional<DragSpec> drag;
    if (with_drag) drag = DragSpec::linear(parse_point(o.start), parse_point(o.drag_target), init.z.frames());
    const Moft ref = reference_for(o, cfg, profile, init.z, drag);
    RegionMask mask = mask_or_full(o.mask, init.z);
    GuidanceConfig g = guidance_from(cfg);
    if (drag) {
        // drag edits run on every frame with a heavier motion term
        if (o.mask.empty())
            mask = drag_region(*drag, init.z.height(), init.z.width(), init.z.frames(),
                               cfg.get_double("drag_half_width"));
        g.clip_frames.clear();
        for (std::size_t f = 0; f < init.z.frames(); ++f) g.clip_frames.push_back(f);
        g.wc = cfg.get_double("drag_wc");
    }
    const GuidanceResult res = run_guidance(init, ref, mask, drag, g, profile);
    const fs::path dir = output_dir(o.out);
    save_tensor(res.z.z, dir / "latent.mft");
    write_log(res.log, o.log.empty() ? dir / "log.csv" : fs::path(o.log));
    if (drag) {
        const TrackletSet tracked = track(res.z.z, {drag->start});
        Tracklet target;
        target.points = drag->trajectory;
        save_tracklets(tracked, dir / "tracked.txt");
        save_tracklets({target}, dir / "target.txt");
        std::printf("mean distance %.4f\n", mean_distance(tracked.front(), target, res.z.z.height(), res.z.z.width()));
    }
    cfg.echo(dir);
    std::printf("final motion loss %.6f\n", res.log.back().motion);
    return 0;
}

TrackletSet reference_tracklets(const MotionPattern& p, const std::vector<Point2>& seeds) {
    TrackletSet out;
    for (const auto& s : seeds) {
        Tracklet t;
        t.points.push_back(s);
        for (const auto& d : p.steps) t.points.push_back({t.points.back().row + d.dy, t.points.back().col + d.dx});
        out.push_back(std::move(t));
    }
    return out;
}

int run_fidelity(const Options& o) {
    TrackletSet generated, reference;
    if (!o.generated.empty() && !o.reference.empty()) {
        generated = load_tracklets(o.generated);
        reference = load_tracklets(o.reference);
    } else if (!o.video.empty() && !o.manifest.empty()) {
        const Tensor4 video = load_tensor(o.video);
        const auto entries = read_manifest(o.manifest);
        const auto it = std::find_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) {
            return fs::weakly_canonical(e.path) == fs::weakly_canonical(o.video);
        });
        if (it == entries.end()) throw DataError("video not listed in manifest");
        std::vector<Point2> seeds;
        for (std::size_t r = 4; r < video.height(); r += 8)
            for (std::size_t c = 4; c < video.width(); c += 8) seeds.push_back({double(r), double(c)});
        generated = track(video, seeds);
        reference = reference_tracklets(it->pattern, seeds);
    } else {
        throw ArgumentError("need --generated and --reference, or --video and --manifest");
    }
    const double score = motion_fidelity(generated, reference);
    std::printf("%.4f\n", score);
    if (o.display) std::printf("display %.4f (rescaled, not the raw score)\n", fidelity_display_scale(score));
    return 0;
}

int run_gradcheck(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    const GradCheckResult r = gradient_check(cfg.get_seed("seed"));
    std::printf("max relative gradient error %.3e over %zu coordinates\n", r.max_rel_error, r.coordinates);
    return r.max_rel_error < 1e-4 ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"moft-kit: motion feature extraction, analysis and guidance on toy video features"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "key=value config file")->check(CLI::ExistingFile);
        sub->add_option("--set", o.overrides, "override one config key (key=value)");
    };
    auto seed_flag = [&](CLI::App* sub) {
        sub->add_option_function<std::string>("--seed", [&](const std::string& v) { o.overrides.push_back("seed=" + v); },
                                              "RNG seed");
    };

    auto* synth = app.add_subcommand("synth", "generate panning latent videos and a manifest");
    common(synth);
    seed_flag(synth);
    synth->add_option("--pattern", o.patterns, "comma-separated pattern names (right,left,down,up,static,...)");
    synth->add_option("--schedule", o.schedule, "custom displacement schedule instead of named patterns");
    synth->add_option_function<std::string>("--scenes", [&](const std::string& v) { o.overrides.push_back("scenes=" + v); },
                                            "scenes per pattern");
    synth->add_option("--out", o.out, "output directory")->required();

    auto* calibrate = app.add_subcommand("calibrate", "fit PCA on a synth manifest and write a channel profile");
    common(calibrate);
    calibrate->add_option("--manifest", o.manifest, "manifest from synth")->required()->check(CLI::ExistingFile);
    calibrate->add_option_function<std::string>("--q", [&](const std::string& v) { o.overrides.push_back("q=" + v); },
                                                 "retained channel fraction");
    calibrate->add_option("--out", o.out, "profile path");

    auto* extract = app.add_subcommand("extract", "extract a Moft from a latent video (or features)");
    common(extract);
    extract->add_option("--input", o.input, "MFT1 latent video")->required()->check(CLI::ExistingFile);
    extract->add_option("--profile", o.profile, "channel profile")->required()->check(CLI::ExistingFile);
    extract->add_flag("--features", o.input_is_features, "input already holds features");
    extract->add_option("--trace-csv", o.trace_csv, "write per-channel traces (region mean unless --point)");
    extract->add_option("--mask", o.mask, "PGM region for region-mean traces");
    extract->add_option("--point", o.point, "row,col for point traces");
    extract->add_option("--out", o.out, "Moft output path");

    auto* heatmap = app.add_subcommand("heatmap", "similarity heatmap between two Mofts");
    heatmap->add_option("--ref", o.ref, "reference Moft")->required()->check(CLI::ExistingFile);
    heatmap->add_option("--target", o.target, "target Moft")->required()->check(CLI::ExistingFile);
    heatmap->add_option("--point", o.point, "row,col in the reference")->required();
    heatmap->add_option("--out", o.out, "output prefix (.pgm and .csv)");

    auto* synth_ref = app.add_subcommand("synth-ref", "synthesize a reference Moft from a direction schedule");
    common(synth_ref);
    synth_ref->add_option("--schedule", o.schedule, "\"dx,dy;...\" or \"right x8,left x7\"")->required();
    synth_ref->add_option("--profile", o.profile, "calibrated profile")->required()->check(CLI::ExistingFile);
    synth_ref->add_option("--out", o.out, "Moft output path");

    auto guide_flags = [&](CLI::App* sub) {
        common(sub);
        sub->add_option("--init", o.init, "initial latent video")->required()->check(CLI::ExistingFile);
        sub->add_option("--profile", o.profile, "calibrated profile")->required()->check(CLI::ExistingFile);
        sub->add_option("--ref", o.ref, "reference Moft");
        sub->add_option("--schedule", o.schedule, "direction schedule for a synthesized reference");
        sub->add_option("--mask", o.mask, "PGM region");
        sub->add_option_function<std::string>("--steps", [&](const std::string& v) { o.overrides.push_back("steps=" + v); },
                                              "denoising steps T");
        sub->add_option_function<std::string>("--lr", [&](const std::string& v) { o.overrides.push_back("lr=" + v); },
                                              "learning rate");
        sub->add_option_function<std::string>("--clip-frames",
                                              [&](const std::string& v) { o.overrides.push_back("clip_frames=" + v); },
                                              "1-based frame ranges, e.g. 1-8");
        sub->add_option("--out", o.out, "output directory")->required();
        sub->add_option("--log", o.log, "loss log CSV (default <out>/log.csv)");
    };
    auto* guide = app.add_subcommand("guide", "run MOFT guidance on a latent video");
    guide_flags(guide);

    auto* drag = app.add_subcommand("drag", "point drag with MOFT and vanilla feature losses");
    guide_flags(drag);
    drag->add_option("--start", o.start, "row,col")->required();
    drag->add_option("--target", o.drag_target, "row,col")->required();
    for (const char* t : {"t1", "t2", "t3"})
        drag->add_option_function<std::string>(std::string("--") + t,
                                               [&, t](const std::string& v) { o.overrides.push_back(std::string(t) + "=" + v); },
                                               "schedule threshold");

    auto* fidelity = app.add_subcommand("fidelity", "motion fidelity between tracklet sets");
    fidelity->add_option("--generated", o.generated, "tracklets of the generated video");
    fidelity->add_option("--reference", o.reference, "reference tracklets");
    fidelity->add_option("--video", o.video, "latent video to track");
    fidelity->add_option("--manifest", o.manifest, "manifest holding the video's displacements");
    fidelity->add_flag("--display", o.display, "also print the 0-50 display rescale");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the guidance gradients");
    common(gradcheck);
    seed_flag(gradcheck);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n' << app.help();
        return 1;
    }

    try {
        if (*synth) return run_synth(o);
        if (*calibrate) return run_calibrate(o);
        if (*extract) return run_extract(o);
        if (*heatmap) return run_heatmap(o);
        if (*synth_ref) return run_synth_ref(o);
        if (*guide) return run_guide(o, false);
        if (*drag) return run_guide(o, true);
        if (*fidelity) return run_fidelity(o);
        if (*gradcheck) return run_gradcheck(o);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
