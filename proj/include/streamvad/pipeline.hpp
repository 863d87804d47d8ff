#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "streamvad/detectors.hpp"
#include "streamvad/metrics.hpp"
#include "streamvad/pose.hpp"

namespace streamvad {

// Windows the inference stage judged normal during one subset, capped at
// quota. Ground-truth labels are never consulted for admission.
struct CollectionBuffer {
    int subset_index = 0;
    std::vector<PoseWindow> accepted;
    std::vector<double> accepted_scores;  // parallel to accepted
    std::size_t quota = 0;
    double threshold_used = 0.0;
};

struct AugmentationPolicy {
    double normal_ratio = 0.95;
    double anomaly_ratio = 0.05;
    std::vector<PoseWindow> anomaly_pool;
};

struct SubsetRecord {
    int subset = 0;
    std::int64_t deployed_version = 0;
    double threshold = 0.0;
    std::size_t buffer_size = 0;
    double contamination = 0.0;  // anomalous fraction among accepted
    double auc_roc = 0.0;        // of the checkpoint trained this subset
    double auc_pr = 0.0;
    double eer = 0.0;
    // bookkeeping beyond the history CSV columns
    std::size_t injected = 0;
    std::int64_t trained_version = -1;  // -1: no training this subset
};

struct PipelineState {
    WeightCheckpoint deployed;
    std::vector<WeightCheckpoint> pending;  // trained, not yet deployed
    int subset_cursor = -1;                 // subset currently being processed
    std::vector<SubsetRecord> history;
    std::vector<WeightCheckpoint> trained;  // archive of every trained checkpoint
};

enum class Lineage { LatestTrained, Deployed };

struct OnlineConfig {
    int n_subsets = 12;
    double quota_fraction = 0.8;        // quota = ceil(subset size * fraction)
    double collection_quantile = 0.95;  // of deployed scores on calibration set
    TrainConfig train;
    Lineage lineage = Lineage::LatestTrained;
    bool concurrent = false;
    std::uint64_t seed = 0;
};

struct OnlineInputs {
    std::vector<PoseWindow> target_windows;  // the stream, in stream order
    std::vector<PoseWindow> calibration;     // source-domain windows for thresholds
    std::vector<PoseWindow> eval_set;        // held-out labeled windows
    AugmentationPolicy augmentation;
};

struct MetricRow {
    std::string case_tag;  // no_train | online | offline
    std::string target_id;
    int training_number = 0;  // 1..n for online, 0 otherwise
    std::int64_t checkpoint_version = 0;
    double auc_roc = 0.0;
    double auc_pr = 0.0;
    double eer = 0.0;
};

struct OnlineResult {
    PipelineState state;
    std::vector<MetricRow> rows;  // one per training, in subset order
};

// Contiguous-in-time partition into n_subsets blocks whose sizes differ by at
// most one (earlier subsets take the larger size); assigns subset_index.
// Throws when n_subsets < 1 or n_subsets > |windows|.
std::vector<PoseWindow> partition_stream(std::vector<PoseWindow> windows,
                                         int n_subsets);

// Empirical quantile with linear interpolation between order statistics.
double calibrate_threshold(std::vector<double> scores, double quantile);

// Scores every window with the currently deployed checkpoint.
std::vector<double> run_inference_stage(std::span<const PoseWindow> windows,
                                        const PipelineState& state);

// Accepts windows scoring <= threshold, in stream order, until quota. An
// under-quota buffer is valid.
CollectionBuffer collect_normals(std::span<const PoseWindow> windows,
                                 std::span<const double> scores, double threshold,
                                 std::size_t quota, int subset_index);

// Appends round(|accepted| * anomaly_ratio / normal_ratio) seeded draws from
// the anomaly pool (without replacement; with replacement once exhausted),
// then shuffles. Throws on an empty buffer, or when draws are needed from an
// empty pool.
std::vector<PoseWindow> augment_buffer(const CollectionBuffer& buffer,
                                       const AugmentationPolicy& policy,
                                       std::uint64_t seed);

// Fine-tunes from the most recently trained checkpoint (or from deployed,
// under Lineage::Deployed) and appends the result to state.pending.
void run_training_stage(PipelineState& state,
                        std::span<const PoseWindow> training_windows,
                        const TrainConfig& config, int subset_index,
                        std::uint64_t seed,
                        Lineage lineage = Lineage::LatestTrained);

// Subset-boundary swap. Entering subset k deploys the checkpoint trained on
// subset k-2's buffer; subsets 0 and 1 keep the source weights. No-op when
// that checkpoint does not exist.
void advance_and_swap(PipelineState& state);

// Deployed-checkpoint slot for the concurrent mode: atomic replace,
// torn-read-free loads.
class CheckpointSlot {
public:
    explicit CheckpointSlot(WeightCheckpoint initial);
    std::shared_ptr<const WeightCheckpoint> load() const;
    void store(WeightCheckpoint next);

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const WeightCheckpoint> current_;
};

// The full loop: partition, then per subset swap, calibrate, infer, collect,
// augment, train, and evaluate the fresh checkpoint on the eval set.
// config.concurrent overlaps subset-k inference with subset-(k-1) training;
// results are identical to the sequential mode.
OnlineResult run_online(const OnlineInputs& inputs,
                        const WeightCheckpoint& source,
                        const OnlineConfig& config);

BinaryScoreSet score_set(const WeightCheckpoint& checkpoint,
                         std::span<const PoseWindow> windows);

// Run history: subset,deployed_version,threshold,buffer_size,contamination,
// auc_roc,auc_pr,eer
void write_history_csv(std::span<const SubsetRecord> history,
                       const std::filesystem::path& path);

}  // namespace streamvad
