#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "moft/io.hpp"
#include "moft/metrics.hpp"
#include "moft/moft.hpp"

using namespace moft;
namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "moft_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// Runs moft-kit inside the work directory and returns its exit code.
int kit(const std::string& args) {
    const std::string cmd = "cd '" + work_dir().string() + "' && '" MOFT_KIT_PATH "' " + args + " > last.log 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() { return read_text(work_dir() / "last.log"); }

} // namespace

TEST_CASE("cli pipeline") {
    REQUIRE(kit("synth --pattern right,left,down,up --scenes 8 --seed 1 --out cal") == 0);
    CHECK(fs::exists(work_dir() / "cal/manifest.txt"));
    CHECK(fs::exists(work_dir() / "cal/config.txt"));
    CHECK(fs::exists(work_dir() / "cal/video_031.mft"));

    REQUIRE(kit("calibrate --manifest cal/manifest.txt --out prof.txt") == 0);
    const MotionChannelProfile p = load_profile(work_dir() / "prof.txt");
    CHECK(p.size() == 3);
    CHECK(p.has_statistics());
    CHECK(fs::exists(work_dir() / "prof_pca.csv"));

    REQUIRE(kit("synth --pattern static --scenes 1 --seed 7 --out still") == 0);
    REQUIRE(kit("synth-ref --schedule 'right x15' --profile prof.txt --out ref.mft") == 0);
    const Moft ref = load_moft(work_dir() / "ref.mft");
    CHECK(ref.profile_id == p.id());
    CHECK(ref.frames() == 16);

    SUBCASE("guide with a reference file and a schedule agree") {
        REQUIRE(kit("guide --init still/video_000.mft --profile prof.txt --ref ref.mft --set steps=6 --set t1=5 "
                    "--set t2=4 --set t3=1 --out g_ref") == 0);
        REQUIRE(kit("guide --init still/video_000.mft --profile prof.txt --schedule 'right x15' --set steps=6 "
                    "--set t1=5 --set t2=4 --set t3=1 --out g_sched") == 0);
        // The stored reference is rounded to f32, so the runs agree closely, not bitwise.
        CHECK(max_abs_diff(load_tensor(work_dir() / "g_ref/latent.mft"), load_tensor(work_dir() / "g_sched/latent.mft")) < 1e-4);
        const std::string log = read_text(work_dir() / "g_ref/log.csv");
        CHECK(log.rfind("step,wc,wp,loss_motion,loss_drag\n5,", 0) == 0);
        CHECK(read_text(work_dir() / "g_ref/config.txt").find("steps=6\n") != std::string::npos);
    }
    SUBCASE("extract, heatmap and fidelity") {
        REQUIRE(kit("extract --input cal/video_000.mft --profile prof.txt --out m0.mft --trace-csv tr.csv") == 0);
        CHECK(read_text(work_dir() / "tr.csv").rfind("frame,ch", 0) == 0);
        REQUIRE(kit("heatmap --ref m0.mft --target m0.mft --point 16,16 --out hm") == 0);
        CHECK(last_log().find("peak 16,16") != std::string::npos);
        CHECK(fs::exists(work_dir() / "hm.pgm"));
        CHECK(fs::exists(work_dir() / "hm.csv"));
        REQUIRE(kit("fidelity --video cal/video_000.mft --manifest cal/manifest.txt") == 0);
        CHECK(std::stod(last_log()) == doctest::Approx(2.0).epsilon(1e-6));
    }
    SUBCASE("drag writes tracklets") {
        REQUIRE(kit("drag --init still/video_000.mft --profile prof.txt --start 12,11 --target 12,21 --set steps=8 "
                    "--set t1=6 --set t2=5 --set t3=2 --out d1") == 0);
        CHECK(last_log().find("mean distance") != std::string::npos);
        const TrackletSet target = load_tracklets(work_dir() / "d1/target.txt");
        REQUIRE(target.size() == 1);
        CHECK(target[0].points.back() == Point2{12, 21});
        CHECK(load_tracklets(work_dir() / "d1/tracked.txt").size() == 1);
    }
    SUBCASE("exit codes") {
        CHECK(kit("") == 1);
        CHECK(kit("synth --bogus") == 1);
        CHECK(kit("calibrate --manifest missing.txt") == 1);
        CHECK(kit("guide --init still/video_000.mft --profile prof.txt --schedule right --set nope=1 --out x") == 2);
        CHECK(last_log().find("unknown config key") != std::string::npos);
        CHECK(kit("guide --init still/video_000.mft --profile prof.txt --out x") == 2);
        CHECK(kit("guide --init still/video_000.mft --profile prof.txt --schedule 'right x15' --set lr=1e14 "
                  "--out x") == 3);
        CHECK(last_log().find("diverged at step") != std::string::npos);
    }
}

TEST_CASE("cli gradient check") {
    CHECK(kit("gradcheck --seed 2") == 0);
    CHECK(last_log().find("max relative gradient error") != std::string::npos);
}
