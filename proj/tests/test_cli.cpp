#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "streamvad/config.hpp"

// End-to-end checks of the installed binary and its exit-code contract:
// 0 success, 2 config error, 3 missing artifact, 4 runtime error.

using namespace streamvad;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(STREAMVAD_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::filesystem::path work_dir() {
    auto dir = std::filesystem::temp_directory_path() / "streamvad_cli_tests";
    return dir;
}

}  // namespace

TEST_CASE("cli exit codes across the whole protocol") {
    const auto dir = work_dir();
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto cfg = dir / "micro.cfg";
    const auto out = (dir / "out").string();

    ExperimentConfig config;
    config.detector = DetectorKind::Likelihood;
    config.window = 12;
    config.n_subsets = 3;
    config.offline_epochs = 4;
    config.train.epochs = 2;
    config.scenario.n_tracks = 8;
    config.scenario.frames_per_track = 50;
    write_config(config, cfg);

    SUBCASE("config errors exit 2") {
        const auto bad = dir / "bad.cfg";
        std::ofstream(bad) << "[experiment]\nwindow = twelve\n";
        CHECK(run("gen --config " + bad.string() + " --out " + out) == 2);
    }

    SUBCASE("missing artifacts exit 3") {
        CHECK(run("report --config " + cfg.string() + " --out " + out) == 3);
        CHECK(run("online --config " + cfg.string() + " --out " + out) == 3);
    }

    SUBCASE("happy path exits 0 and refuses accidental overwrite") {
        CHECK(run("gen --config " + cfg.string() + " --out " + out) == 0);
        CHECK(run("gen --config " + cfg.string() + " --out " + out) == 2);
        CHECK(run("gen --config " + cfg.string() + " --out " + out + " --force") == 0);
        CHECK(run("offline --config " + cfg.string() + " --out " + out) == 0);
        CHECK(run("zeroshot --config " + cfg.string() + " --out " + out) == 0);
        CHECK(run("zeroshot --config " + cfg.string() + " --out " + out +
                  " --eval-on source") == 0);
        CHECK(run("online --config " + cfg.string() + " --out " + out +
                  " --concurrent") == 0);
        CHECK(run("report --config " + cfg.string() + " --out " + out) == 0);
    }

    SUBCASE("bad usage is rejected") {
        CHECK(run("") != 0);
        CHECK(run("frobnicate --config " + cfg.string()) != 0);
        CHECK(run("gen --config " + (dir / "absent.cfg").string()) != 0);
    }
}
