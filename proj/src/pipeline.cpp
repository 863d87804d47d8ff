#include "streamvad/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "streamvad/io_util.hpp"
#include "streamvad/rng.hpp"

namespace streamvad {

namespace {

// per-subset seed derivation salts
constexpr std::uint64_t kSaltAugment = 101;
constexpr std::uint64_t kSaltTrain = 202;

std::size_t expected_injection(std::size_t accepted, const AugmentationPolicy& policy) {
    if (policy.anomaly_ratio <= 0.0) return 0;
    return static_cast<std::size_t>(std::llround(
        static_cast<double>(accepted) * policy.anomaly_ratio / policy.normal_ratio));
}

const WeightCheckpoint& training_base(const PipelineState& state, Lineage lineage) {
    if (lineage == Lineage::LatestTrained && !state.trained.empty()) {
        return state.trained.back();
    }
    return state.deployed;
}

}  // namespace

std::vector<PoseWindow> partition_stream(std::vector<PoseWindow> windows,
                                         int n_subsets) {
    if (n_subsets < 1) {
        throw std::invalid_argument("partition_stream: n_subsets must be >= 1");
    }
    const std::size_t n = windows.size();
    if (static_cast<std::size_t>(n_subsets) > n) {
        throw std::invalid_argument("partition_stream: more subsets than windows");
    }
    const std::size_t base = n / static_cast<std::size_t>(n_subsets);
    const std::size_t larger = n % static_cast<std::size_t>(n_subsets);
    std::size_t cursor = 0;
    for (int s = 0; s < n_subsets; ++s) {
        const std::size_t size = base + (static_cast<std::size_t>(s) < larger ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i) {
            windows[cursor++].subset_index = s;
        }
    }
    return windows;
}

double calibrate_threshold(std::vector<double> scores, double quantile) {
    if (scores.empty()) {
        throw std::invalid_argument("calibrate_threshold: empty score list");
    }
    if (!(quantile > 0.0 && quantile < 1.0)) {
        throw std::invalid_argument("calibrate_threshold: quantile outside (0, 1)");
    }
    std::sort(scores.begin(), scores.end());
    const double pos = quantile * static_cast<double>(scores.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, scores.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return scores[lo] + frac * (scores[hi] - scores[lo]);
}

std::vector<double> run_inference_stage(std::span<const PoseWindow> windows,
                                        const PipelineState& state) {
    return score_windows(state.deployed, windows);
}

CollectionBuffer collect_normals(std::span<const PoseWindow> windows,
                                 std::span<const double> scores, double threshold,
                                 std::size_t quota, int subset_index) {
    if (quota < 1) throw std::invalid_argument("collect_normals: quota must be >= 1");
    if (windows.size() != scores.size()) {
        throw std::invalid_argument("collect_normals: score/window count mismatch");
    }
    CollectionBuffer buffer;
    buffer.subset_index = subset_index;
    buffer.quota = quota;
    buffer.threshold_used = threshold;
    for (std::size_t i = 0; i < windows.size() && buffer.accepted.size() < quota; ++i) {
        if (scores[i] <= threshold) {
            buffer.accepted.push_back(windows[i]);
            buffer.accepted_scores.push_back(scores[i]);
        }
    }
    return buffer;
}

std::vector<PoseWindow> augment_buffer(const CollectionBuffer& buffer,
                                       const AugmentationPolicy& policy,
                                       std::uint64_t seed) {
    if (buffer.accepted.empty()) {
        throw std::invalid_argument("augment_buffer: empty buffer");
    }
    if (policy.anomaly_ratio > 0.0 && policy.anomaly_pool.empty()) {
        throw std::invalid_argument("augment_buffer: anomaly pool is empty");
    }
    for (const PoseWindow& w : policy.anomaly_pool) {
        if (!w.anomalous) {
            throw std::invalid_argument("augment_buffer: pool window not anomalous");
        }
    }

    Rng rng(seed);
    std::vector<PoseWindow> out = buffer.accepted;
    const std::size_t want = expected_injection(buffer.accepted.size(), policy);

    // draw without replacement; fall back to with-replacement once exhausted
    std::vector<std::size_t> pool_order(policy.anomaly_pool.size());
    for (std::size_t i = 0; i < pool_order.size(); ++i) pool_order[i] = i;
    rng.shuffle(pool_order);
    for (std::size_t i = 0; i < want; ++i) {
        const std::size_t pick = i < pool_order.size()
                                     ? pool_order[i]
                                     : rng.index(policy.anomaly_pool.size());
        out.push_back(policy.anomaly_pool[pick]);
    }
    rng.shuffle(out);
    return out;
}

void run_training_stage(PipelineState& state,
                        std::span<const PoseWindow> training_windows,
                        const TrainConfig& config, int subset_index,
                        std::uint64_t seed, Lineage lineage) {
    if (training_windows.empty()) {
        throw std::invalid_argument("run_training_stage: empty training windows");
    }
    const WeightCheckpoint& base = training_base(state, lineage);
    WeightCheckpoint next =
        fine_tune(base, features_matrix(training_windows), config, subset_index, seed);
    state.trained.push_back(next);
    state.pending.push_back(std::move(next));
}

void advance_and_swap(PipelineState& state) {
    state.subset_cursor += 1;
    const int wanted = state.subset_cursor - 2;
    if (wanted < 0) return;  // subsets 0 and 1 keep the source weights

    // deploy the checkpoint trained on subset `wanted`, dropping it and any
    // older stragglers from the pending queue
    for (std::size_t i = 0; i < state.pending.size(); ++i) {
        const std::vector<int>& prov = state.pending[i].provenance;
        if (!prov.empty() && prov.back() == wanted) {
            state.deployed = state.pending[i];
            state.pending.erase(state.pending.begin(),
                                state.pending.begin() + static_cast<std::ptrdiff_t>(i) + 1);
            return;
        }
    }
}

CheckpointSlot::CheckpointSlot(WeightCheckpoint initial)
    : current_(std::make_shared<const WeightCheckpoint>(std::move(initial))) {}

std::shared_ptr<const WeightCheckpoint> CheckpointSlot::load() const {
    std::lock_guard lock(mutex_);
    return current_;
}

void CheckpointSlot::store(WeightCheckpoint next) {
    auto fresh = std::make_shared<const WeightCheckpoint>(std::move(next));
    std::lock_guard lock(mutex_);
    current_ = std::move(fresh);
}

BinaryScoreSet score_set(const WeightCheckpoint& checkpoint,
                         std::span<const PoseWindow> windows) {
    BinaryScoreSet set;
    set.entries.reserve(windows.size());
    for (const PoseWindow& w : windows) {
        set.entries.push_back({score_window(checkpoint, w.features), w.anomalous});
    }
    return set;
}

OnlineResult run_online(const OnlineInputs& inputs, const WeightCheckpoint& source,
                        const OnlineConfig& config) {
    if (inputs.calibration.empty()) {
        throw std::invalid_argument("run_online: empty calibration set");
    }
    if (inputs.eval_set.empty()) {
        throw std::invalid_argument("run_online: empty eval set");
    }

    OnlineResult result;
    PipelineState& state = result.state;
    state.deployed = source;

    const std::vector<PoseWindow> stream =
        partition_stream(inputs.target_windows, config.n_subsets);

    // Subset boundaries within the partitioned stream.
    std::vector<std::pair<std::size_t, std::size_t>> bounds(
        static_cast<std::size_t>(config.n_subsets), {stream.size(), 0});
    for (std::size_t i = 0; i < stream.size(); ++i) {
        auto& [begin, end] = bounds[static_cast<std::size_t>(stream[i].subset_index)];
        begin = std::min(begin, i);
        end = i + 1;
    }

    CheckpointSlot slot(source);

    // The training stage is computed off shared state (the worker touches
    // nothing but its own inputs) and integrated on the main thread at join
    // points, so inference on subset k can overlap training on subset k-1.
    struct TrainOutcome {
        WeightCheckpoint checkpoint;
        MetricRow row;
    };
    auto compute_training = [&inputs, &config](WeightCheckpoint base,
                                               std::vector<PoseWindow> windows,
                                               int subset,
                                               std::uint64_t seed) -> TrainOutcome {
        TrainOutcome out;
        out.checkpoint =
            fine_tune(base, features_matrix(windows), config.train, subset, seed);
        const BinaryScoreSet eval = score_set(out.checkpoint, inputs.eval_set);
        out.row.case_tag = "online";
        out.row.training_number = subset + 1;
        out.row.checkpoint_version = out.checkpoint.version;
        out.row.auc_roc = auc_roc(eval);
        out.row.auc_pr = auc_pr(eval);
        out.row.eer = eer(eval);
        return out;
    };

    std::future<TrainOutcome> in_flight;
    SubsetRecord* in_flight_record = nullptr;
    auto integrate = [&] {
        if (!in_flight.valid()) return;
        TrainOutcome out = in_flight.get();
        in_flight_record->trained_version = out.checkpoint.version;
        in_flight_record->auc_roc = out.row.auc_roc;
        in_flight_record->auc_pr = out.row.auc_pr;
        in_flight_record->eer = out.row.eer;
        result.rows.push_back(std::move(out.row));
        state.trained.push_back(out.checkpoint);
        state.pending.push_back(std::move(out.checkpoint));
        in_flight_record = nullptr;
    };

    state.history.resize(static_cast<std::size_t>(config.n_subsets));
    try {
        for (int k = 0; k < config.n_subsets; ++k) {
            // the swap for subset k wants the k-2 checkpoint, which was
            // integrated before the k-1 job launched; only that job can
            // still be running here and it is joined before the next launch
            advance_and_swap(state);
            slot.store(state.deployed);

            SubsetRecord& record = state.history[static_cast<std::size_t>(k)];
            record.subset = k;
            record.deployed_version = state.deployed.version;
            record.auc_roc = record.auc_pr = record.eer =
                std::numeric_limits<double>::quiet_NaN();

            const auto scoring = slot.load();
            record.threshold = calibrate_threshold(
                score_windows(*scoring, inputs.calibration), config.collection_quantile);

            const auto [begin, end] = bounds[static_cast<std::size_t>(k)];
            const std::span<const PoseWindow> subset(stream.data() + begin, end - begin);
            const std::vector<double> scores = score_windows(*scoring, subset);

            const std::size_t quota = static_cast<std::size_t>(std::ceil(
                static_cast<double>(subset.size()) * config.quota_fraction));
            CollectionBuffer buffer = collect_normals(subset, scores, record.threshold,
                                                      std::max<std::size_t>(quota, 1), k);
            record.buffer_size = buffer.accepted.size();
            std::size_t contaminated = 0;
            for (const PoseWindow& w : buffer.accepted) {
                if (w.anomalous) ++contaminated;
            }
            record.contamination =
                buffer.accepted.empty()
                    ? 0.0
                    : static_cast<double>(contaminated) /
                          static_cast<double>(buffer.accepted.size());

            integrate();
            if (buffer.accepted.empty()) continue;  // nothing to train on

            std::vector<PoseWindow> training = augment_buffer(
                buffer, inputs.augmentation, mix_seed(config.seed, kSaltAugment + k));
            record.injected = training.size() - buffer.accepted.size();
            const std::uint64_t train_seed = mix_seed(config.seed, kSaltTrain + k);
            WeightCheckpoint base = training_base(state, config.lineage);

            in_flight_record = &record;
            if (config.concurrent) {
                in_flight = std::async(std::launch::async, compute_training,
                                       std::move(base), std::move(training), k,
                                       train_seed);
            } else {
                std::promise<TrainOutcome> ready;
                ready.set_value(
                    compute_training(std::move(base), std::move(training), k, train_seed));
                in_flight = ready.get_future();
            }
        }
        integrate();
    } catch (const std::exception& e) {
        if (in_flight.valid()) in_flight.wait();
        throw std::runtime_error("run_online: subset " +
                                 std::to_string(state.subset_cursor) + ": " + e.what());
    }
    return result;
}

void write_history_csv(std::span<const SubsetRecord> history,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path.string());
    out << "subset,deployed_version,threshold,buffer_size,contamination,"
           "auc_roc,auc_pr,eer\n";
    for (const SubsetRecord& r : history) {
        out << r.subset << ',' << r.deployed_version << ','
            << format_double(r.threshold) << ',' << r.buffer_size << ','
            << format_double(r.contamination) << ',' << format_double(r.auc_roc)
            << ',' << format_double(r.auc_pr) << ',' << format_double(r.eer) << '\n';
    }
}

}  // namespace streamvad
