#include "streamvad/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "streamvad/errors.hpp"
#include "streamvad/io_util.hpp"
#include "streamvad/rng.hpp"
#include "streamvad/streamgen.hpp"

namespace streamvad {

namespace {

constexpr std::uint64_t kSaltPool = 11;
constexpr std::uint64_t kSaltSourceInit = 21;
constexpr std::uint64_t kSaltSourceTrain = 22;
constexpr std::uint64_t kSaltOfflineInit = 41;  // + target index
constexpr std::uint64_t kSaltOfflineTrain = 61;
constexpr std::uint64_t kSaltOnline = 81;

std::vector<int> ae_dims(const ExperimentConfig& c) {
    const int d = 2 * kDefaultJointCount * c.window;
    return {d, c.ae_hidden, c.ae_bottleneck, c.ae_hidden, d};
}

std::vector<PoseWindow> load_windows(const ExperimentConfig& c,
                                     const std::filesystem::path& path) {
    return segment_stream(read_stream(path), c.window, c.stride);
}

void require_file(const std::filesystem::path& path, const std::string& hint) {
    if (!std::filesystem::exists(path)) {
        throw MissingArtifactError(path.string() + " is missing; " + hint);
    }
}

// Full training in one domain: a fresh seeded model taken to the offline
// convergence budget (reconstruction) or the closed-form fit (likelihood).
WeightCheckpoint train_from_scratch(const ExperimentConfig& c,
                                    std::span<const PoseWindow> windows,
                                    std::uint64_t init_seed,
                                    std::uint64_t train_seed) {
    if (windows.empty()) {
        throw std::invalid_argument("train_from_scratch: no training windows");
    }
    WeightCheckpoint ckpt;
    ckpt.kind = c.detector;
    ckpt.version = 0;
    ckpt.rng_seed_used = train_seed;
    const Eigen::MatrixXd data = features_matrix(windows);
    if (c.detector == DetectorKind::Reconstruction) {
        TrainConfig budget = c.train;
        budget.epochs = c.offline_epochs;
        ckpt.params =
            ae_train(ae_init(ae_dims(c), init_seed), data, budget, train_seed).params;
    } else {
        ckpt.params = gaussian_fit(data);
    }
    return ckpt;
}

MetricRow evaluate(const WeightCheckpoint& ckpt, std::span<const PoseWindow> eval_set,
                   const std::string& case_tag, const std::string& target_id) {
    const BinaryScoreSet set = score_set(ckpt, eval_set);
    MetricRow row;
    row.case_tag = case_tag;
    row.target_id = target_id;
    row.training_number = 0;
    row.checkpoint_version = ckpt.version;
    row.auc_roc = auc_roc(set);
    row.auc_pr = auc_pr(set);
    row.eer = eer(set);
    return row;
}

void dump_curves(const WeightCheckpoint& ckpt, std::span<const PoseWindow> eval_set,
                 const OutputPaths& paths, const std::string& tag) {
    const BinaryScoreSet set = score_set(ckpt, eval_set);
    write_roc_csv(roc_curve(set), paths.curves_dir() / ("roc_" + tag + ".csv"));
    write_pr_csv(pr_curve(set), paths.curves_dir() / ("pr_" + tag + ".csv"));
}

std::string row_line(const MetricRow& r) {
    std::ostringstream out;
    out << r.case_tag << ',' << r.target_id << ',' << r.training_number << ','
        << r.checkpoint_version << ',' << format_double(r.auc_roc) << ','
        << format_double(r.auc_pr) << ',' << format_double(r.eer);
    return out.str();
}

double mean_of(std::span<const MetricRow> rows, double MetricRow::* member) {
    double sum = 0.0;
    for (const MetricRow& r : rows) sum += r.*member;
    return sum / static_cast<double>(rows.size());
}

}  // namespace

std::filesystem::path OutputPaths::offline_checkpoint(int target) const {
    return checkpoints_dir() / ("target" + std::to_string(target) + "_offline.ckpt");
}

std::filesystem::path OutputPaths::online_checkpoint(int target) const {
    return checkpoints_dir() / ("target" + std::to_string(target) + "_online.ckpt");
}

std::filesystem::path OutputPaths::history_csv(int target) const {
    return root / ("history_target" + std::to_string(target) + ".csv");
}

void write_rows_csv(std::span<const MetricRow> rows,
                    const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_rows_csv: cannot open " + path.string());
    out << "case,target,training_number,checkpoint_version,auc_roc,auc_pr,eer\n";
    for (const MetricRow& r : rows) out << row_line(r) << '\n';
}

std::vector<MetricRow> read_rows_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open rows file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty rows file");
    std::vector<MetricRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 7) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": expected 7 fields");
        }
        MetricRow r;
        r.case_tag = std::string(fields[0]);
        r.target_id = std::string(fields[1]);
        std::int64_t iv = 0;
        if (!parse_int64(fields[2], iv)) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": bad training_number");
        }
        r.training_number = static_cast<int>(iv);
        if (!parse_int64(fields[3], r.checkpoint_version) ||
            !parse_double(fields[4], r.auc_roc) || !parse_double(fields[5], r.auc_pr) ||
            !parse_double(fields[6], r.eer)) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": bad numeric field");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

EvalPoolSplit split_eval_pool(std::vector<PoseWindow> test_windows,
                              std::uint64_t seed) {
    std::vector<std::size_t> anomalous;
    for (std::size_t i = 0; i < test_windows.size(); ++i) {
        if (test_windows[i].anomalous) anomalous.push_back(i);
    }
    Rng rng(seed);
    rng.shuffle(anomalous);
    const std::size_t pool_count = anomalous.size() / 2;

    std::vector<bool> in_pool(test_windows.size(), false);
    EvalPoolSplit split;
    for (std::size_t i = 0; i < pool_count; ++i) {
        in_pool[anomalous[i]] = true;
        split.anomaly_pool.push_back(test_windows[anomalous[i]]);
    }
    for (std::size_t i = 0; i < test_windows.size(); ++i) {
        if (!in_pool[i]) split.eval_set.push_back(std::move(test_windows[i]));
    }
    return split;
}

void cmd_gen(const ExperimentConfig& config, const std::filesystem::path& out,
             bool force) {
    const OutputPaths paths{out};
    const ScenarioFiles files = scenario_paths(config.scenario, paths.streams_dir());
    if (!force) {
        std::vector<std::filesystem::path> existing;
        for (const auto& p : {files.source_train, files.source_test}) {
            if (std::filesystem::exists(p)) existing.push_back(p);
        }
        for (const auto& p : files.target_streams) {
            if (std::filesystem::exists(p)) existing.push_back(p);
        }
        for (const auto& p : files.target_tests) {
            if (std::filesystem::exists(p)) existing.push_back(p);
        }
        if (!existing.empty()) {
            throw ConfigError("refusing to overwrite " + existing.front().string() +
                              " (and " + std::to_string(existing.size() - 1) +
                              " more); pass --force to regenerate");
        }
    }
    std::filesystem::create_directories(paths.streams_dir());
    gen_scenario(config.scenario, paths.streams_dir());
    write_config(config, paths.config_copy());
}

void cmd_offline(const ExperimentConfig& config, const std::filesystem::path& out) {
    const OutputPaths paths{out};
    const ScenarioFiles files = scenario_paths(config.scenario, paths.streams_dir());
    require_file(files.source_train, "run `streamvad gen` first");
    std::filesystem::create_directories(paths.checkpoints_dir());
    std::filesystem::create_directories(paths.rows_dir());
    std::filesystem::create_directories(paths.curves_dir());

    const std::vector<PoseWindow> source_train = load_windows(config, files.source_train);
    const WeightCheckpoint source = train_from_scratch(
        config, source_train, mix_seed(config.seed, kSaltSourceInit),
        mix_seed(config.seed, kSaltSourceTrain));
    write_checkpoint(source, paths.source_checkpoint());

    std::vector<MetricRow> no_train_rows;
    std::vector<MetricRow> offline_rows;
    for (std::size_t d = 0; d < config.scenario.targets.size(); ++d) {
        const std::string& target_id = config.scenario.targets[d].domain_id;
        require_file(files.target_streams[d], "run `streamvad gen` first");
        const std::vector<PoseWindow> stream =
            load_windows(config, files.target_streams[d]);
        const WeightCheckpoint offline = train_from_scratch(
            config, stream, mix_seed(config.seed, kSaltOfflineInit + d),
            mix_seed(config.seed, kSaltOfflineTrain + d));
        write_checkpoint(offline, paths.offline_checkpoint(static_cast<int>(d)));

        const EvalPoolSplit split =
            split_eval_pool(load_windows(config, files.target_tests[d]),
                            mix_seed(config.seed, kSaltPool + d));
        no_train_rows.push_back(evaluate(source, split.eval_set, "no_train", target_id));
        offline_rows.push_back(evaluate(offline, split.eval_set, "offline", target_id));
        dump_curves(source, split.eval_set, paths, "no_train_" + target_id);
        dump_curves(offline, split.eval_set, paths, "offline_" + target_id);
    }
    write_rows_csv(no_train_rows, paths.no_train_rows());
    write_rows_csv(offline_rows, paths.offline_rows());
}

void cmd_zeroshot(const ExperimentConfig& config, const std::filesystem::path& out,
                  EvalSplit split_kind) {
    const OutputPaths paths{out};
    const ScenarioFiles files = scenario_paths(config.scenario, paths.streams_dir());
    require_file(paths.source_checkpoint(), "run `streamvad offline` first");
    std::filesystem::create_directories(paths.rows_dir());
    const WeightCheckpoint source = read_checkpoint(paths.source_checkpoint());

    if (split_kind == EvalSplit::Source) {
        require_file(files.source_test, "run `streamvad gen` first");
        const std::vector<PoseWindow> eval_set =
            load_windows(config, files.source_test);
        const std::vector<MetricRow> rows = {
            evaluate(source, eval_set, "no_train", config.scenario.source.domain_id)};
        write_rows_csv(rows, paths.rows_dir() / "no_train_source.csv");
        return;
    }

    std::vector<MetricRow> rows;
    for (std::size_t d = 0; d < config.scenario.targets.size(); ++d) {
        require_file(files.target_tests[d], "run `streamvad gen` first");
        const EvalPoolSplit split =
            split_eval_pool(load_windows(config, files.target_tests[d]),
                            mix_seed(config.seed, kSaltPool + d));
        rows.push_back(evaluate(source, split.eval_set, "no_train",
                                config.scenario.targets[d].domain_id));
    }
    write_rows_csv(rows, paths.no_train_rows());
}

void cmd_online(const ExperimentConfig& config, const std::filesystem::path& out,
                bool concurrent) {
    const OutputPaths paths{out};
    const ScenarioFiles files = scenario_paths(config.scenario, paths.streams_dir());
    require_file(paths.source_checkpoint(), "run `streamvad offline` first");
    std::filesystem::create_directories(paths.rows_dir());
    std::filesystem::create_directories(paths.curves_dir());
    const WeightCheckpoint source = read_checkpoint(paths.source_checkpoint());

    require_file(files.source_train, "run `streamvad gen` first");
    const std::vector<PoseWindow> calibration =
        load_windows(config, files.source_train);

    std::vector<MetricRow> all_rows;
    for (std::size_t d = 0; d < config.scenario.targets.size(); ++d) {
        const std::string& target_id = config.scenario.targets[d].domain_id;
        require_file(files.target_streams[d], "run `streamvad gen` first");
        require_file(files.target_tests[d], "run `streamvad gen` first");

        OnlineInputs inputs;
        inputs.target_windows = load_windows(config, files.target_streams[d]);
        inputs.calibration = calibration;
        EvalPoolSplit split =
            split_eval_pool(load_windows(config, files.target_tests[d]),
                            mix_seed(config.seed, kSaltPool + d));
        inputs.eval_set = std::move(split.eval_set);
        inputs.augmentation.anomaly_pool = std::move(split.anomaly_pool);

        OnlineConfig online;
        online.n_subsets = config.n_subsets;
        online.quota_fraction = config.quota_fraction;
        online.collection_quantile = config.collection_quantile;
        online.train = config.train;
        online.lineage = config.lineage;
        online.concurrent = concurrent;
        online.seed = mix_seed(config.seed, kSaltOnline + d);

        OnlineResult result = run_online(inputs, source, online);
        for (MetricRow& row : result.rows) {
            row.target_id = target_id;
            all_rows.push_back(row);
        }
        write_history_csv(result.state.history, paths.history_csv(static_cast<int>(d)));
        if (!result.state.trained.empty()) {
            write_checkpoint(result.state.trained.back(),
                             paths.online_checkpoint(static_cast<int>(d)));
            dump_curves(result.state.trained.back(), inputs.eval_set, paths,
                        "online_" + target_id);
        }
    }
    write_rows_csv(all_rows, paths.online_rows());
}

ReportSummary build_report(std::span<const MetricRow> no_train,
                           std::span<const MetricRow> online,
                           std::span<const MetricRow> offline,
                           std::uint64_t config_digest) {
    ReportSummary summary;
    summary.config_digest = config_digest;

    std::vector<std::string> target_order;
    for (const MetricRow& r : no_train) {
        if (std::find(target_order.begin(), target_order.end(), r.target_id) ==
            target_order.end()) {
            target_order.push_back(r.target_id);
        }
    }

    std::string digest_input;
    for (const std::string& target : target_order) {
        ReportSummary::TargetBlock block;
        block.target_id = target;

        auto find_single = [&](std::span<const MetricRow> rows,
                               const char* tag) -> const MetricRow& {
            for (const MetricRow& r : rows) {
                if (r.target_id == target) return r;
            }
            throw MissingArtifactError("report: no " + std::string(tag) +
                                       " row for target " + target);
        };
        block.no_train = find_single(no_train, "no_train");
        block.offline = find_single(offline, "offline");

        std::vector<MetricRow> online_rows;
        for (const MetricRow& r : online) {
            if (r.target_id == target) online_rows.push_back(r);
        }
        if (online_rows.empty()) {
            throw MissingArtifactError("report: no online rows for target " + target);
        }
        block.online_mean.case_tag = "online";
        block.online_mean.target_id = target;
        block.online_mean.training_number =
            static_cast<int>(online_rows.size());  // how many evaluations averaged
        block.online_mean.checkpoint_version = online_rows.back().checkpoint_version;
        block.online_mean.auc_roc = mean_of(online_rows, &MetricRow::auc_roc);
        block.online_mean.auc_pr = mean_of(online_rows, &MetricRow::auc_pr);
        block.online_mean.eer = mean_of(online_rows, &MetricRow::eer);

        block.retention_auc_roc =
            retention(block.online_mean.auc_roc, block.offline.auc_roc);
        block.retention_auc_pr =
            retention(block.online_mean.auc_pr, block.offline.auc_pr);
        block.retention_eer = retention(block.online_mean.eer, block.offline.eer);

        digest_input += row_line(block.no_train) + '\n';
        digest_input += row_line(block.online_mean) + '\n';
        digest_input += row_line(block.offline) + '\n';
        digest_input += format_double(block.retention_auc_roc) + ',' +
                        format_double(block.retention_auc_pr) + ',' +
                        format_double(block.retention_eer) + '\n';
        summary.targets.push_back(std::move(block));
    }
    summary.report_digest = fnv1a(digest_input);
    return summary;
}

ReportSummary cmd_report(const ExperimentConfig& config,
                         const std::filesystem::path& out) {
    const auto start = std::chrono::steady_clock::now();
    const OutputPaths paths{out};

    std::vector<std::string> missing;
    if (!std::filesystem::exists(paths.no_train_rows())) {
        missing.push_back("no_train rows (run `streamvad zeroshot` or `offline`)");
    }
    if (!std::filesystem::exists(paths.online_rows())) {
        missing.push_back("online rows (run `streamvad online`)");
    }
    if (!std::filesystem::exists(paths.offline_rows())) {
        missing.push_back("offline rows (run `streamvad offline`)");
    }
    if (!missing.empty()) {
        std::string what = "report inputs missing:";
        for (const std::string& m : missing) what += "\n  - " + m;
        throw MissingArtifactError(what);
    }

    const std::vector<MetricRow> no_train = read_rows_csv(paths.no_train_rows());
    const std::vector<MetricRow> online = read_rows_csv(paths.online_rows());
    const std::vector<MetricRow> offline = read_rows_csv(paths.offline_rows());
    ReportSummary summary =
        build_report(no_train, online, offline, config_digest(config));

    std::filesystem::create_directories(paths.report_dir());

    // comparison.csv: one row per (target, case)
    {
        std::ofstream csv(paths.report_dir() / "comparison.csv",
                          std::ios::binary | std::ios::trunc);
        csv << "target,case,auc_roc,auc_pr,eer\n";
        for (const auto& block : summary.targets) {
            for (const MetricRow* r :
                 {&block.no_train, &block.online_mean, &block.offline}) {
                csv << block.target_id << ',' << r->case_tag << ','
                    << format_double(r->auc_roc) << ',' << format_double(r->auc_pr)
                    << ',' << format_double(r->eer) << '\n';
            }
        }
    }
    {
        std::ofstream csv(paths.report_dir() / "retention.csv",
                          std::ios::binary | std::ios::trunc);
        csv << "target,metric,retention_percent\n";
        for (const auto& block : summary.targets) {
            csv << block.target_id << ",auc_roc,"
                << format_double(block.retention_auc_roc) << '\n';
            csv << block.target_id << ",auc_pr,"
                << format_double(block.retention_auc_pr) << '\n';
            csv << block.target_id << ",eer," << format_double(block.retention_eer)
                << '\n';
        }
    }

    // per-metric trend data, one file per target: training_number, online,
    // and the flat offline / no_train reference levels
    struct Trend {
        const char* name;
        double MetricRow::* member;
    };
    for (const Trend& trend : {Trend{"auc_roc", &MetricRow::auc_roc},
                               Trend{"auc_pr", &MetricRow::auc_pr},
                               Trend{"eer", &MetricRow::eer}}) {
        for (const auto& block : summary.targets) {
            std::ofstream dat(paths.report_dir() / ("trend_" + std::string(trend.name) +
                                                    "_" + block.target_id + ".dat"),
                              std::ios::binary | std::ios::trunc);
            dat << "# training_number online offline no_train\n";
            for (const MetricRow& r : online) {
                if (r.target_id != block.target_id) continue;
                dat << r.training_number << ' ' << format_double(r.*trend.member) << ' '
                    << format_double(block.offline.*trend.member) << ' '
                    << format_double(block.no_train.*trend.member) << '\n';
            }
        }
    }

    const double wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::ostringstream txt;
    txt << "streamvad comparison report\n";
    txt << "===========================\n\n";
    for (const auto& block : summary.targets) {
        txt << "target: " << block.target_id << '\n';
        txt << "  case        auc_roc   auc_pr    eer\n";
        char line[128];
        for (const MetricRow* r : {&block.no_train, &block.online_mean, &block.offline}) {
            std::snprintf(line, sizeof(line), "  %-10s  %.5f   %.5f   %.5f\n",
                          r->case_tag.c_str(), r->auc_roc, r->auc_pr, r->eer);
            txt << line;
        }
        std::snprintf(line, sizeof(line),
                      "  retention   %.2f%%    %.2f%%    %.2f%%  (online vs offline)\n\n",
                      block.retention_auc_roc, block.retention_auc_pr,
                      block.retention_eer);
        txt << line;
    }
    txt << "config_digest = " << summary.config_digest << '\n';
    txt << "report_digest = " << summary.report_digest << '\n';
    txt << "wall_seconds = " << format_double(wall_seconds) << '\n';
    std::ofstream out_txt(paths.report_dir() / "comparison.txt",
                          std::ios::binary | std::ios::trunc);
    out_txt << txt.str();

    return summary;
}

}  // namespace streamvad
