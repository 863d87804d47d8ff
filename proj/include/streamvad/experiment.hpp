#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "streamvad/config.hpp"
#include "streamvad/pipeline.hpp"

namespace streamvad {

// File layout under an experiment output directory.
struct OutputPaths {
    std::filesystem::path root;

    std::filesystem::path config_copy() const { return root / "config.cfg"; }
    std::filesystem::path streams_dir() const { return root / "streams"; }
    std::filesystem::path checkpoints_dir() const { return root / "checkpoints"; }
    std::filesystem::path rows_dir() const { return root / "rows"; }
    std::filesystem::path report_dir() const { return root / "report"; }
    std::filesystem::path curves_dir() const { return root / "curves"; }

    std::filesystem::path source_checkpoint() const {
        return checkpoints_dir() / "source.ckpt";
    }
    std::filesystem::path offline_checkpoint(int target) const;
    std::filesystem::path online_checkpoint(int target) const;
    std::filesystem::path history_csv(int target) const;
    std::filesystem::path no_train_rows() const { return rows_dir() / "no_train.csv"; }
    std::filesystem::path online_rows() const { return rows_dir() / "online.csv"; }
    std::filesystem::path offline_rows() const { return rows_dir() / "offline.csv"; }
};

enum class EvalSplit { Target, Source };

// rows CSV: case,target,training_number,checkpoint_version,auc_roc,auc_pr,eer
void write_rows_csv(std::span<const MetricRow> rows,
                    const std::filesystem::path& path);
std::vector<MetricRow> read_rows_csv(const std::filesystem::path& path);

// Deterministic split of a labeled test stream into the evaluation set and
// the anomaly pool reserved for augmentation (half of the anomalous windows,
// chosen by seeded shuffle). Shared by every command so all three cases are
// evaluated on the same windows.
struct EvalPoolSplit {
    std::vector<PoseWindow> eval_set;
    std::vector<PoseWindow> anomaly_pool;
};
EvalPoolSplit split_eval_pool(std::vector<PoseWindow> test_windows,
                              std::uint64_t seed);

// Generate scenario files. Refuses to overwrite existing streams unless
// force is set.
void cmd_gen(const ExperimentConfig& config, const std::filesystem::path& out,
             bool force);

// Train the source checkpoint on source_train and, per target, an offline
// checkpoint on the label-stripped target stream; evaluate both on the
// target eval set, emitting no_train and offline rows.
void cmd_offline(const ExperimentConfig& config,
                 const std::filesystem::path& out);

// Score the eval split with the source checkpoint and emit no_train rows.
// EvalSplit::Source evaluates on source_test instead (diagnostic; written to
// a separate rows file).
void cmd_zeroshot(const ExperimentConfig& config,
                  const std::filesystem::path& out,
                  EvalSplit split = EvalSplit::Target);

// Run the online pipeline per target; emits online rows, per-target history
// CSVs and the final adapted checkpoint.
void cmd_online(const ExperimentConfig& config,
                const std::filesystem::path& out, bool concurrent = false);

struct ReportSummary {
    struct TargetBlock {
        std::string target_id;
        MetricRow no_train;
        MetricRow online_mean;   // mean over the per-training evaluations
        MetricRow offline;
        double retention_auc_roc = 0.0;
        double retention_auc_pr = 0.0;
        double retention_eer = 0.0;
    };
    std::vector<TargetBlock> targets;
    std::uint64_t config_digest = 0;
    std::uint64_t report_digest = 0;  // over rows + retention, not wall time
};

// Pure assembly of the comparison from row lists; cmd_report wraps this.
ReportSummary build_report(std::span<const MetricRow> no_train,
                           std::span<const MetricRow> online,
                           std::span<const MetricRow> offline,
                           std::uint64_t config_digest);

// Render the three-case comparison with retention percentages and the
// per-training-number trend data. Throws MissingArtifactError listing the
// commands still to run when row files are absent.
ReportSummary cmd_report(const ExperimentConfig& config,
                         const std::filesystem::path& out);

}  // namespace streamvad
