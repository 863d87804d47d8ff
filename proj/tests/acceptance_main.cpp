// Acceptance suite: runs every gate the project promises and prints one
// pass/fail line per criterion. Exit status 0 only when all of them hold.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "metric_oracles.hpp"
#include "streamvad/config.hpp"
#include "streamvad/detectors.hpp"
#include "streamvad/errors.hpp"
#include "streamvad/experiment.hpp"
#include "streamvad/io_util.hpp"
#include "streamvad/metrics.hpp"
#include "streamvad/pipeline.hpp"
#include "streamvad/pose.hpp"
#include "streamvad/rng.hpp"
#include "streamvad/streamgen.hpp"

using namespace streamvad;

namespace {

struct Criterion {
    int number;
    std::string description;
    std::function<void(std::string&)> body;  // throws or appends failures
};

std::filesystem::path work_root() {
    return std::filesystem::temp_directory_path() / "streamvad_acceptance";
}

void expect(std::string& failures, bool ok, const std::string& what) {
    if (!ok) failures += (failures.empty() ? "" : "; ") + what;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: retention arithmetic against the published table rows
void criterion_retention(std::string& failures) {
    const double worst = retention(0.565, 0.632);
    const double best = retention(0.625, 0.630);
    expect(failures, std::abs(worst - 89.40) <= 0.02,
           "retention(0.565, 0.632) = " + fmt(worst) + ", want 89.40 +/- 0.02");
    expect(failures, std::abs(best - 99.21) <= 0.02,
           "retention(0.625, 0.630) = " + fmt(best) + ", want 99.21 +/- 0.02");
}

// ---------------------------------------------------------------------------
// criterion 2: metric implementations vs brute-force oracles
void criterion_metric_oracles(std::string& failures) {
    Rng rng(20260809);
    for (int trial = 0; trial < 100; ++trial) {
        const BinaryScoreSet set = oracles::random_set(rng, 64);
        expect(failures, std::abs(auc_roc(set) - oracles::pairwise_auc(set)) < 1e-12,
               "auc_roc != pairwise statistic (trial " + std::to_string(trial) + ")");
        expect(failures, std::abs(auc_roc(set) - oracles::sweep_auc_roc(set)) < 1e-12,
               "auc_roc != sweep oracle (trial " + std::to_string(trial) + ")");
        expect(failures, std::abs(auc_pr(set) - oracles::sweep_auc_pr(set)) < 1e-12,
               "auc_pr != sweep oracle (trial " + std::to_string(trial) + ")");
        expect(failures, std::abs(eer(set) - oracles::sweep_eer(set)) < 1e-12,
               "eer != sweep oracle (trial " + std::to_string(trial) + ")");

        const auto curve = roc_curve(set);
        const auto sweep = oracles::threshold_sweep(set);
        bool same = curve.size() == sweep.size();
        for (std::size_t i = 0; same && i < curve.size(); ++i) {
            same = std::abs(curve[i].tpr - sweep[i].tpr) < 1e-12 &&
                   std::abs(curve[i].fpr - sweep[i].fpr) < 1e-12;
        }
        expect(failures, same,
               "roc_curve != sweep oracle (trial " + std::to_string(trial) + ")");
        if (!failures.empty()) return;  // no point flooding the report
    }
}

// ---------------------------------------------------------------------------
// criterion 3: analytic gradients vs central finite differences
void criterion_gradients(std::string& failures) {
    Rng rng(77);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 4 + static_cast<int>(rng.index(5));
        const int hidden = 3 + static_cast<int>(rng.index(4));
        AutoencoderParams p = ae_init({d, hidden, 2, hidden, d},
                                      900 + static_cast<std::uint64_t>(trial));
        Eigen::MatrixXd batch(d, 1 + static_cast<Eigen::Index>(rng.index(4)));
        for (Eigen::Index c = 0; c < batch.cols(); ++c) {
            for (Eigen::Index r = 0; r < d; ++r) batch(r, c) = rng.uniform(-1.0, 1.0);
        }
        const AeGradient g = ae_grad(p, batch);

        auto loss = [&] {
            double total = 0.0;
            for (Eigen::Index c = 0; c < batch.cols(); ++c) {
                std::vector<double> x(static_cast<std::size_t>(d));
                Eigen::Map<Eigen::VectorXd>(x.data(), d) = batch.col(c);
                total += ae_score(p, x);
            }
            return total / static_cast<double>(batch.cols());
        };
        auto check = [&](double& param, double analytic) {
            const double saved = param;
            param = saved + h;
            const double up = loss();
            param = saved - h;
            const double down = loss();
            param = saved;
            const double fd = (up - down) / (2.0 * h);
            const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-4});
            worst = std::max(worst, std::abs(analytic - fd) / scale);
        };
        for (std::size_t l = 0; l < p.weights.size(); ++l) {
            for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
                for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) {
                    check(p.weights[l](r, c), g.weights[l](r, c));
                }
                check(p.biases[l](r), g.biases[l](r));
            }
        }
    }
    expect(failures, worst < 1e-4,
           "max relative gradient error " + fmt(worst) + " >= 1e-4");
}

// ---------------------------------------------------------------------------
// criteria 4 + 5: the structural reproduction of the three-case protocol

struct ProtocolRun {
    std::filesystem::path out;
    ReportSummary summary;
    ExperimentConfig config;
};

ProtocolRun run_protocol(DetectorKind kind, const std::string& tag) {
    ProtocolRun run;
    run.config = ExperimentConfig{};
    run.config.detector = kind;
    run.out = work_root() / tag;
    std::filesystem::remove_all(run.out);
    cmd_gen(run.config, run.out, false);
    cmd_offline(run.config, run.out);
    cmd_zeroshot(run.config, run.out);
    cmd_online(run.config, run.out, false);
    run.summary = cmd_report(run.config, run.out);
    return run;
}

void criterion_ordering(std::string& failures, const ProtocolRun& recon,
                        const ProtocolRun& gauss) {
    for (const ProtocolRun* run : {&recon, &gauss}) {
        const std::string kind = to_string(run->config.detector);
        const auto& block = run->summary.targets.at(0);
        const double no_train = block.no_train.auc_roc;
        const double online = block.online_mean.auc_roc;
        const double offline = block.offline.auc_roc;
        expect(failures, no_train < online,
               kind + ": zero-shot " + fmt(no_train) + " !< online mean " + fmt(online));
        expect(failures, online <= offline + 0.01,
               kind + ": online mean " + fmt(online) + " !<= offline " + fmt(offline) +
                   " + 0.01");
        expect(failures, block.retention_auc_roc >= 85.0,
               kind + ": retention " + fmt(block.retention_auc_roc) + "% < 85%");
    }
}

void criterion_domain_drop(std::string& failures, const ProtocolRun& recon,
                           const ProtocolRun& gauss) {
    for (const ProtocolRun* run : {&recon, &gauss}) {
        const std::string kind = to_string(run->config.detector);
        const OutputPaths paths{run->out};
        const WeightCheckpoint source = read_checkpoint(paths.source_checkpoint());
        const ScenarioFiles files =
            scenario_paths(run->config.scenario, paths.streams_dir());
        const auto source_test = segment_stream(read_stream(files.source_test),
                                                run->config.window, run->config.stride);
        const auto target_test = segment_stream(read_stream(files.target_tests[0]),
                                                run->config.window, run->config.stride);
        const double on_source = auc_roc(score_set(source, source_test));
        const double on_target = auc_roc(score_set(source, target_test));
        expect(failures, on_source - on_target >= 0.10,
               kind + ": source_test auc " + fmt(on_source) + " - target_test auc " +
                   fmt(on_target) + " < 0.10");
    }
}

// ---------------------------------------------------------------------------
// criterion 6: pipeline invariants and end-to-end bit determinism
void criterion_pipeline(std::string& failures, const ProtocolRun& recon,
                        const ProtocolRun& gauss) {
    const ExperimentConfig& config = gauss.config;
    const OutputPaths paths{gauss.out};
    const ScenarioFiles files = scenario_paths(config.scenario, paths.streams_dir());

    // partition properties on the real stream
    const auto stream = segment_stream(read_stream(files.target_streams[0]),
                                       config.window, config.stride);
    const auto partitioned = partition_stream(stream, config.n_subsets);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(config.n_subsets), 0);
    int prev_subset = 0;
    bool contiguous = true;
    for (const PoseWindow& w : partitioned) {
        if (w.subset_index < prev_subset) contiguous = false;
        prev_subset = w.subset_index;
        ++sizes[static_cast<std::size_t>(w.subset_index)];
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    expect(failures, contiguous, "partition not contiguous in stream order");
    expect(failures, *hi - *lo <= 1, "partition size spread exceeds 1");
    expect(failures, partitioned.size() == stream.size(), "partition lost windows");

    // lag, quota and augmentation invariants straight from the recorded run
    const WeightCheckpoint source = read_checkpoint(paths.source_checkpoint());
    OnlineInputs inputs;
    inputs.target_windows = stream;
    inputs.calibration = segment_stream(read_stream(files.source_train),
                                        config.window, config.stride);
    EvalPoolSplit split =
        split_eval_pool(segment_stream(read_stream(files.target_tests[0]),
                                       config.window, config.stride),
                        mix_seed(config.seed, 11));
    inputs.eval_set = std::move(split.eval_set);
    inputs.augmentation.anomaly_pool = std::move(split.anomaly_pool);
    OnlineConfig online;
    online.n_subsets = config.n_subsets;
    online.quota_fraction = config.quota_fraction;
    online.collection_quantile = config.collection_quantile;
    online.train = config.train;
    online.seed = mix_seed(config.seed, 81);
    const OnlineResult result = run_online(inputs, source, online);

    expect(failures, result.state.history.size() ==
                         static_cast<std::size_t>(config.n_subsets),
           "history row count != n_subsets");
    for (const SubsetRecord& record : result.state.history) {
        const std::size_t quota = static_cast<std::size_t>(
            std::ceil(static_cast<double>(sizes[static_cast<std::size_t>(record.subset)]) *
                      config.quota_fraction));
        expect(failures, record.buffer_size <= quota,
               "subset " + std::to_string(record.subset) + " buffer exceeds quota");
        expect(failures,
               record.injected == static_cast<std::size_t>(std::llround(
                                      static_cast<double>(record.buffer_size) * 0.05 / 0.95)),
               "subset " + std::to_string(record.subset) + " augmentation count wrong");

        if (record.deployed_version == 0) {
            expect(failures, record.subset <= 1,
                   "source weights deployed after subset 1");
        } else {
            const WeightCheckpoint& deployed = result.state.trained.at(
                static_cast<std::size_t>(record.deployed_version - 1));
            bool lag_ok = !deployed.provenance.empty();
            for (int p : deployed.provenance) {
                if (p >= record.subset - 1) lag_ok = false;
            }
            expect(failures, lag_ok,
                   "subset " + std::to_string(record.subset) +
                       " deployed provenance violates the two-step lag");
        }
    }

    // the threshold rule really is honored by collection
    {
        const std::vector<double> calib_scores = score_windows(source, inputs.calibration);
        const double threshold =
            calibrate_threshold(calib_scores, config.collection_quantile);
        std::vector<PoseWindow> first_subset;
        for (const PoseWindow& w : partitioned) {
            if (w.subset_index == 0) first_subset.push_back(w);
        }
        const std::vector<double> scores = score_windows(source, first_subset);
        const CollectionBuffer buffer =
            collect_normals(first_subset, scores, threshold, first_subset.size(), 0);
        bool under = true;
        for (double s : buffer.accepted_scores) {
            if (s > buffer.threshold_used) under = false;
        }
        expect(failures, under, "accepted score above the recorded threshold");
    }

    // bit determinism: the heavier reconstruction path re-run in place...
    {
        const OutputPaths recon_paths{recon.out};
        const std::string before = read_text_file(recon_paths.online_rows().string());
        const std::string history_before =
            read_text_file(recon_paths.history_csv(0).string());
        cmd_online(recon.config, recon.out, false);
        expect(failures,
               read_text_file(recon_paths.online_rows().string()) == before,
               "reconstruction online rows differ across identical runs");
        expect(failures,
               read_text_file(recon_paths.history_csv(0).string()) == history_before,
               "reconstruction history differs across identical runs");
    }
    // ...and a full likelihood protocol replayed into a fresh directory
    {
        const ProtocolRun replay = run_protocol(DetectorKind::Likelihood, "determinism");
        const OutputPaths a{gauss.out};
        const OutputPaths b{replay.out};
        for (const auto& [pa, pb] :
             {std::pair{a.online_rows(), b.online_rows()},
              std::pair{a.history_csv(0), b.history_csv(0)},
              std::pair{a.no_train_rows(), b.no_train_rows()},
              std::pair{a.offline_rows(), b.offline_rows()}}) {
            expect(failures, read_text_file(pa.string()) == read_text_file(pb.string()),
                   "file " + pa.filename().string() + " differs across identical runs");
        }
    }
}

// ---------------------------------------------------------------------------
// criterion 7: serialization round trips and line-numbered failure modes
void criterion_serialization(std::string& failures, const ProtocolRun& recon) {
    const OutputPaths paths{recon.out};
    const ScenarioFiles files =
        scenario_paths(recon.config.scenario, paths.streams_dir());
    const auto tmp = work_root() / "serialization";
    std::filesystem::create_directories(tmp);

    // pose stream: field-exact and byte-exact round trip
    const auto frames = read_stream(files.source_test);
    write_stream(frames, tmp / "stream.csv");
    expect(failures, read_stream(tmp / "stream.csv") == frames,
           "pose stream round trip changed fields");
    expect(failures, read_text_file(files.source_test.string()) ==
                         read_text_file((tmp / "stream.csv").string()),
           "pose stream round trip changed bytes");

    // checkpoints, both kinds
    for (const auto& ckpt_path :
         {paths.source_checkpoint(), paths.offline_checkpoint(0)}) {
        const WeightCheckpoint ckpt = read_checkpoint(ckpt_path);
        write_checkpoint(ckpt, tmp / "ckpt.ckpt");
        expect(failures, read_text_file(ckpt_path.string()) ==
                             read_text_file((tmp / "ckpt.ckpt").string()),
               "checkpoint round trip changed bytes: " + ckpt_path.filename().string());
    }

    // config: parse(render) identity, and the written copy is canonical
    expect(failures, parse_config_text(render_config(recon.config)) == recon.config,
           "config parse(render) is not the identity");
    expect(failures, render_config(parse_config(paths.config_copy())) ==
                         read_text_file(paths.config_copy().string()),
           "stored config copy is not canonical");

    // report digest is stable across repeated renderings
    const ReportSummary again = cmd_report(recon.config, recon.out);
    expect(failures, again.report_digest == recon.summary.report_digest,
           "report digest changed across invocations");

    // malformed inputs carry 1-based line numbers
    {
        std::ofstream bad(tmp / "bad_stream.csv");
        bad << "#streamvad-pose v1 K=2\n";
        bad << "s,0,t,0,0.0,0.0,0.5,1.0,1.0,0.5\n";
        bad << "s,1,t,9,0.0,0.0,0.5,1.0,1.0,0.5\n";  // label 9 is invalid
    }
    try {
        (void)read_stream(tmp / "bad_stream.csv");
        expect(failures, false, "malformed stream accepted");
    } catch (const ParseError& e) {
        expect(failures, std::string(e.what()).find("line 3") != std::string::npos,
               "stream error lacks its line number");
    }
    try {
        (void)parse_config_text("[experiment]\nn_subsets = soon\n");
        expect(failures, false, "malformed config accepted");
    } catch (const ConfigError& e) {
        expect(failures, std::string(e.what()).find("line 2") != std::string::npos,
               "config error lacks its line number");
    }
    try {
        std::ofstream bad(tmp / "bad.ckpt");
        bad << "#streamvad-ckpt v1 kind=likelihood version=0 dims=4 provenance= seed=0\n";
        bad << "1.0\n";
        bad.close();
        (void)read_checkpoint(tmp / "bad.ckpt");
        expect(failures, false, "truncated checkpoint accepted");
    } catch (const ParseError&) {
    }
}

}  // namespace

int main() {
    const auto started = std::chrono::steady_clock::now();
    std::filesystem::remove_all(work_root());
    std::filesystem::create_directories(work_root());

    // the two full protocol runs backing criteria 4-7
    ProtocolRun recon, gauss;
    std::string setup_failure;
    try {
        recon = run_protocol(DetectorKind::Reconstruction, "reconstruction");
        gauss = run_protocol(DetectorKind::Likelihood, "likelihood");
    } catch (const std::exception& e) {
        setup_failure = e.what();
    }

    const std::vector<Criterion> criteria = {
        {1, "retention arithmetic matches the published bounds", criterion_retention},
        {2, "metrics match pairwise and threshold-sweep oracles to 1e-12",
         criterion_metric_oracles},
        {3, "analytic gradients match central finite differences",
         criterion_gradients},
        {4, "no-train < mean online <= offline (+0.01) with retention >= 85%",
         [&](std::string& f) {
             if (!setup_failure.empty()) throw std::runtime_error(setup_failure);
             criterion_ordering(f, recon, gauss);
         }},
        {5, "source-trained auc drops >= 0.10 from source_test to target_test",
         [&](std::string& f) {
             if (!setup_failure.empty()) throw std::runtime_error(setup_failure);
             criterion_domain_drop(f, recon, gauss);
         }},
        {6, "lag-2, quota, augmentation and bit-determinism invariants",
         [&](std::string& f) {
             if (!setup_failure.empty()) throw std::runtime_error(setup_failure);
             criterion_pipeline(f, recon, gauss);
         }},
        {7, "serialization round trips and line-numbered failures",
         [&](std::string& f) {
             if (!setup_failure.empty()) throw std::runtime_error(setup_failure);
             criterion_serialization(f, recon);
         }},
    };

    int passed = 0;
    for (const Criterion& criterion : criteria) {
        std::string failures;
        try {
            criterion.body(failures);
        } catch (const std::exception& e) {
            failures = e.what();
        }
        if (failures.empty()) {
            ++passed;
            std::cout << "[PASS] criterion " << criterion.number << ": "
                      << criterion.description << '\n';
        } else {
            std::cout << "[FAIL] criterion " << criterion.number << ": "
                      << criterion.description << " -- " << failures << '\n';
        }
    }

    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - started)
                               .count();
    std::cout << "acceptance: " << passed << "/" << criteria.size()
              << " criteria passed in " << fmt(seconds) << "s\n";
    return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
