#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "streamvad/pose.hpp"

namespace streamvad {

constexpr double kVarianceFloor = 1e-6;

// Fully connected autoencoder, tanh on hidden layers, identity output.
// weights[l] is (layer_dims[l+1] x layer_dims[l]); biases[l] matches rows.
struct AutoencoderParams {
    std::vector<int> layer_dims;  // e.g. [D, H, B, H, D]
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Diagonal Gaussian; every variance entry is >= kVarianceFloor.
struct GaussianParams {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

enum class DetectorKind { Reconstruction, Likelihood };

std::string to_string(DetectorKind kind);
DetectorKind detector_kind_from_string(const std::string& s);

// Versioned detector parameters. provenance lists the subset indices the
// checkpoint was trained on, sorted and duplicate free; version increases by
// one per fine_tune along a lineage.
struct WeightCheckpoint {
    DetectorKind kind = DetectorKind::Reconstruction;
    std::int64_t version = 0;
    std::variant<AutoencoderParams, GaussianParams> params;
    std::vector<int> provenance;
    std::uint64_t rng_seed_used = 0;

    const AutoencoderParams& ae() const;
    const GaussianParams& gaussian() const;
};

struct TrainConfig {
    int epochs = 20;
    double learning_rate = 1e-2;
    int batch_size = 32;
    double adaptation_rate = 0.5;  // likelihood-kind mixing weight

    bool operator==(const TrainConfig&) const = default;
};

// Glorot-uniform weights (|w| <= sqrt(6 / (fan_in + fan_out))), zero biases,
// deterministic in seed. dims must start and end with the same value and
// have an interior dim strictly below it.
AutoencoderParams ae_init(const std::vector<int>& dims, std::uint64_t seed);

// Mean squared reconstruction error of one feature vector.
double ae_score(const AutoencoderParams& params, std::span<const double> features);

struct AeGradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Exact analytic gradient of mean-over-batch ae_score. batch holds one
// sample per column.
AeGradient ae_grad(const AutoencoderParams& params, const Eigen::MatrixXd& batch);

struct AeTrainResult {
    AutoencoderParams params;
    std::vector<double> epoch_loss;  // full-set loss after each epoch
};

// Plain mini-batch gradient descent with seeded shuffling; deterministic in
// (inputs, seed). data holds one sample per column.
AeTrainResult ae_train(const AutoencoderParams& params, const Eigen::MatrixXd& data,
                       const TrainConfig& config, std::uint64_t seed);

// Per-dimension sample mean and population variance (divide by n), variance
// clamped below by variance_floor. Needs at least 2 samples.
GaussianParams gaussian_fit(const Eigen::MatrixXd& data,
                            double variance_floor = kVarianceFloor);

// Negative log likelihood under the diagonal Gaussian:
// 0.5 * sum_d [ log(2 pi var_d) + (x_d - mean_d)^2 / var_d ].
double gaussian_score(const GaussianParams& params, std::span<const double> features);

// One adaptation step. Reconstruction kind continues ae_train from the given
// params; likelihood kind refits as the convex mixture
// (1 - rho) * old + rho * gaussian_fit(data) with rho = adaptation_rate.
// Version is incremented and subset (when given) appended to provenance.
WeightCheckpoint fine_tune(const WeightCheckpoint& checkpoint,
                           const Eigen::MatrixXd& data, const TrainConfig& config,
                           std::optional<int> subset, std::uint64_t seed);

// Feature vectors of a window list as one sample-per-column matrix.
Eigen::MatrixXd features_matrix(std::span<const PoseWindow> windows);

// Score dispatch on checkpoint kind. Throws on feature dimension mismatch.
double score_window(const WeightCheckpoint& checkpoint, std::span<const double> features);
std::vector<double> score_windows(const WeightCheckpoint& checkpoint,
                                  std::span<const PoseWindow> windows);

// Checkpoint file: one header line
//   #streamvad-ckpt v1 kind=<k> version=<n> dims=<...> provenance=<...> seed=<n>
// then one parameter per line in fixed order (reconstruction: per layer the
// weight matrix row-major then the bias; likelihood: mean then variance).
// Floats use shortest round-trip form; read-write is exact.
void write_checkpoint(const WeightCheckpoint& checkpoint,
                      const std::filesystem::path& path);
WeightCheckpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace streamvad
