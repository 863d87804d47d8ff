#include <CLI11.hpp>

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "streamvad/config.hpp"
#include "streamvad/errors.hpp"
#include "streamvad/experiment.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitMissingArtifact = 3;
constexpr int kExitRuntimeError = 4;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streamvad: online pose-based anomaly detection experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    bool force = false;
    bool concurrent = false;
    std::string eval_on = "target";

    app.add_option("--config", config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (default: out)");

    auto* gen = app.add_subcommand("gen", "generate the synthetic scenario streams");
    gen->add_flag("--force", force, "overwrite existing scenario files");

    auto* offline = app.add_subcommand(
        "offline", "train source and per-target offline checkpoints, evaluate both");

    auto* zeroshot = app.add_subcommand(
        "zeroshot", "evaluate the source checkpoint with no adaptation");
    zeroshot->add_option("--eval-on", eval_on, "source|target (default: target)")
        ->check(CLI::IsMember({"source", "target"}));

    auto* online =
        app.add_subcommand("online", "run the three-stage online adaptation loop");
    online->add_flag("--concurrent", concurrent,
                     "overlap inference with the previous subset's training");

    auto* report = app.add_subcommand(
        "report", "render the no_train/online/offline comparison and retention");

    CLI11_PARSE(app, argc, argv);

    try {
        const streamvad::ExperimentConfig config = streamvad::parse_config(config_path);
        const std::filesystem::path out(out_dir);
        if (gen->parsed()) {
            streamvad::cmd_gen(config, out, force);
            std::cout << "scenario written under " << out_dir << "/streams\n";
        } else if (offline->parsed()) {
            streamvad::cmd_offline(config, out);
            std::cout << "source and offline checkpoints trained; rows written\n";
        } else if (zeroshot->parsed()) {
            streamvad::cmd_zeroshot(config, out,
                                    eval_on == "source" ? streamvad::EvalSplit::Source
                                                        : streamvad::EvalSplit::Target);
            std::cout << "zero-shot rows written\n";
        } else if (online->parsed()) {
            streamvad::cmd_online(config, out, concurrent);
            std::cout << "online run complete; rows and history written\n";
        } else if (report->parsed()) {
            const streamvad::ReportSummary summary = streamvad::cmd_report(config, out);
            std::cout << streamvad::read_text_file(
                (out / "report" / "comparison.txt").string());
            (void)summary;
        }
    } catch (const streamvad::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const streamvad::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << '\n';
        return kExitMissingArtifact;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
    return 0;
}
