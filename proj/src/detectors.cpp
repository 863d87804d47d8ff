#include "streamvad/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "streamvad/errors.hpp"
#include "streamvad/io_util.hpp"
#include "streamvad/rng.hpp"

namespace streamvad {

namespace {

constexpr std::string_view kCkptHeaderPrefix = "#streamvad-ckpt v1 ";
constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_dims(const std::vector<int>& dims) {
    if (dims.size() < 3) {
        throw std::invalid_argument("autoencoder needs at least [D, B, D] dims");
    }
    for (int d : dims) {
        if (d < 1) throw std::invalid_argument("autoencoder dims must be positive");
    }
    if (dims.front() != dims.back()) {
        throw std::invalid_argument("autoencoder input and output dims must match");
    }
    const int bottleneck = *std::min_element(dims.begin() + 1, dims.end() - 1);
    if (bottleneck >= dims.front()) {
        throw std::invalid_argument("autoencoder bottleneck must be below the input dim");
    }
}

// Batch forward pass; activations[0] is the input, activations[L] the output.
std::vector<Eigen::MatrixXd> forward(const AutoencoderParams& p,
                                     const Eigen::MatrixXd& batch) {
    const std::size_t layers = p.weights.size();
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(layers + 1);
    activations.push_back(batch);
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z =
            (p.weights[l] * activations.back()).colwise() + p.biases[l];
        if (l + 1 < layers) z = z.array().tanh();
        activations.push_back(std::move(z));
    }
    return activations;
}

}  // namespace

std::string to_string(DetectorKind kind) {
    return kind == DetectorKind::Reconstruction ? "reconstruction" : "likelihood";
}

DetectorKind detector_kind_from_string(const std::string& s) {
    if (s == "reconstruction") return DetectorKind::Reconstruction;
    if (s == "likelihood") return DetectorKind::Likelihood;
    throw std::invalid_argument("unknown detector kind: '" + s + "'");
}

const AutoencoderParams& WeightCheckpoint::ae() const {
    const auto* p = std::get_if<AutoencoderParams>(&params);
    if (!p) throw std::logic_error("checkpoint does not hold autoencoder params");
    return *p;
}

const GaussianParams& WeightCheckpoint::gaussian() const {
    const auto* p = std::get_if<GaussianParams>(&params);
    if (!p) throw std::logic_error("checkpoint does not hold gaussian params");
    return *p;
}

AutoencoderParams ae_init(const std::vector<int>& dims, std::uint64_t seed) {
    check_dims(dims);
    AutoencoderParams p;
    p.layer_dims = dims;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) {
                w(r, c) = rng.uniform(-a, a);
            }
        }
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return p;
}

double ae_score(const AutoencoderParams& params, std::span<const double> features) {
    const int d = params.layer_dims.front();
    if (features.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("ae_score: feature dim " +
                                    std::to_string(features.size()) + ", expected " +
                                    std::to_string(d));
    }
    Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(features.data(), d);
    const std::vector<Eigen::MatrixXd> acts = forward(params, x);
    return (acts.back() - x).squaredNorm() / static_cast<double>(d);
}

AeGradient ae_grad(const AutoencoderParams& params, const Eigen::MatrixXd& batch) {
    if (batch.cols() == 0) throw std::invalid_argument("ae_grad: empty batch");
    const int d = params.layer_dims.front();
    if (batch.rows() != d) {
        throw std::invalid_argument("ae_grad: feature dim mismatch");
    }

    const std::size_t layers = params.weights.size();
    const std::vector<Eigen::MatrixXd> acts = forward(params, batch);

    AeGradient grad;
    grad.weights.resize(layers);
    grad.biases.resize(layers);

    // loss = mean over batch of ||y - x||^2 / D
    const double scale = 2.0 / (static_cast<double>(d) * static_cast<double>(batch.cols()));
    Eigen::MatrixXd delta = scale * (acts.back() - batch);
    for (std::size_t l = layers; l-- > 0;) {
        grad.weights[l] = delta * acts[l].transpose();
        grad.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (params.weights[l].transpose() * delta).cwiseProduct(
                (1.0 - acts[l].array().square()).matrix());
        }
    }
    return grad;
}

AeTrainResult ae_train(const AutoencoderParams& params, const Eigen::MatrixXd& data,
                       const TrainConfig& config, std::uint64_t seed) {
    if (data.cols() == 0) throw std::invalid_argument("ae_train: empty training set");
    if (!(config.learning_rate >= 0.0)) {
        throw std::invalid_argument("ae_train: learning rate must be >= 0");
    }
    if (config.batch_size < 1 || config.epochs < 0) {
        throw std::invalid_argument("ae_train: bad batch size or epoch count");
    }
    if (data.rows() != params.layer_dims.front()) {
        throw std::invalid_argument("ae_train: feature dim mismatch");
    }

    AeTrainResult result;
    result.params = params;
    Rng rng(seed);

    const std::size_t n = static_cast<std::size_t>(data.cols());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            Eigen::MatrixXd batch(data.rows(), static_cast<Eigen::Index>(count));
            for (std::size_t i = 0; i < count; ++i) {
                batch.col(static_cast<Eigen::Index>(i)) =
                    data.col(static_cast<Eigen::Index>(order[start + i]));
            }
            const AeGradient g = ae_grad(result.params, batch);
            for (std::size_t l = 0; l < g.weights.size(); ++l) {
                result.params.weights[l] -= config.learning_rate * g.weights[l];
                result.params.biases[l] -= config.learning_rate * g.biases[l];
            }
        }
        const std::vector<Eigen::MatrixXd> acts = forward(result.params, data);
        result.epoch_loss.push_back((acts.back() - data).squaredNorm() /
                                    (static_cast<double>(data.rows()) *
                                     static_cast<double>(data.cols())));
    }
    return result;
}

GaussianParams gaussian_fit(const Eigen::MatrixXd& data, double variance_floor) {
    if (data.cols() < 2) {
        throw std::invalid_argument("gaussian_fit: needs at least 2 samples");
    }
    GaussianParams p;
    p.mean = data.rowwise().mean();
    p.variance = (data.colwise() - p.mean).array().square().rowwise().mean();
    p.variance = p.variance.cwiseMax(variance_floor);
    return p;
}

double gaussian_score(const GaussianParams& params, std::span<const double> features) {
    const Eigen::Index d = params.mean.size();
    if (features.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("gaussian_score: feature dim " +
                                    std::to_string(features.size()) + ", expected " +
                                    std::to_string(d));
    }
    double score = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double diff = features[static_cast<std::size_t>(i)] - params.mean(i);
        score += std::log(kTwoPi * params.variance(i)) +
                 diff * diff / params.variance(i);
    }
    return 0.5 * score;
}

WeightCheckpoint fine_tune(const WeightCheckpoint& checkpoint,
                           const Eigen::MatrixXd& data, const TrainConfig& config,
                           std::optional<int> subset, std::uint64_t seed) {
    if (data.cols() == 0) throw std::invalid_argument("fine_tune: empty training set");

    WeightCheckpoint next;
    next.kind = checkpoint.kind;
    next.version = checkpoint.version + 1;
    next.provenance = checkpoint.provenance;
    next.rng_seed_used = seed;
    if (subset) {
        if (std::find(next.provenance.begin(), next.provenance.end(), *subset) ==
            next.provenance.end()) {
            next.provenance.push_back(*subset);
            std::sort(next.provenance.begin(), next.provenance.end());
        }
    }

    if (checkpoint.kind == DetectorKind::Reconstruction) {
        next.params = ae_train(checkpoint.ae(), data, config, seed).params;
    } else {
        const double rho = config.adaptation_rate;
        if (rho < 0.0 || rho > 1.0) {
            throw std::invalid_argument("fine_tune: adaptation rate outside [0, 1]");
        }
        const GaussianParams& old = checkpoint.gaussian();
        GaussianParams mixed;
        if (rho == 0.0) {
            mixed = old;
        } else if (rho == 1.0) {
            mixed = gaussian_fit(data);
        } else {
            const GaussianParams fit = gaussian_fit(data);
            mixed.mean = (1.0 - rho) * old.mean + rho * fit.mean;
            mixed.variance =
                ((1.0 - rho) * old.variance + rho * fit.variance).cwiseMax(kVarianceFloor);
        }
        next.params = std::move(mixed);
    }
    return next;
}

Eigen::MatrixXd features_matrix(std::span<const PoseWindow> windows) {
    if (windows.empty()) return Eigen::MatrixXd(0, 0);
    const std::size_t d = windows.front().features.size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(d),
                      static_cast<Eigen::Index>(windows.size()));
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].features.size() != d) {
            throw std::invalid_argument("features_matrix: inconsistent feature dims");
        }
        m.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::VectorXd>(windows[i].features.data(),
                                              static_cast<Eigen::Index>(d));
    }
    return m;
}

double score_window(const WeightCheckpoint& checkpoint,
                    std::span<const double> features) {
    if (checkpoint.kind == DetectorKind::Reconstruction) {
        return ae_score(checkpoint.ae(), features);
    }
    return gaussian_score(checkpoint.gaussian(), features);
}

std::vector<double> score_windows(const WeightCheckpoint& checkpoint,
                                  std::span<const PoseWindow> windows) {
    std::vector<double> scores;
    scores.reserve(windows.size());
    for (const PoseWindow& w : windows) {
        scores.push_back(score_window(checkpoint, w.features));
    }
    return scores;
}

void write_checkpoint(const WeightCheckpoint& checkpoint,
                      const std::filesystem::path& path) {
    std::ostringstream out;
    out << kCkptHeaderPrefix << "kind=" << to_string(checkpoint.kind)
        << " version=" << checkpoint.version << " dims=";
    if (checkpoint.kind == DetectorKind::Reconstruction) {
        const auto& dims = checkpoint.ae().layer_dims;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) out << ',';
            out << dims[i];
        }
    } else {
        out << checkpoint.gaussian().mean.size();
    }
    out << " provenance=";
    for (std::size_t i = 0; i < checkpoint.provenance.size(); ++i) {
        if (i) out << ',';
        out << checkpoint.provenance[i];
    }
    out << " seed=" << checkpoint.rng_seed_used << '\n';

    if (checkpoint.kind == DetectorKind::Reconstruction) {
        const AutoencoderParams& p = checkpoint.ae();
        for (std::size_t l = 0; l < p.weights.size(); ++l) {
            for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
                for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) {
                    out << format_double(p.weights[l](r, c)) << '\n';
                }
            }
            for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) {
                out << format_double(p.biases[l](r)) << '\n';
            }
        }
    } else {
        const GaussianParams& p = checkpoint.gaussian();
        for (Eigen::Index i = 0; i < p.mean.size(); ++i) {
            out << format_double(p.mean(i)) << '\n';
        }
        for (Eigen::Index i = 0; i < p.variance.size(); ++i) {
            out << format_double(p.variance(i)) << '\n';
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("write_checkpoint: cannot open " + path.string());
    file << out.str();
}

WeightCheckpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw MissingArtifactError("read_checkpoint: cannot open " + path.string());
    }
    std::string header;
    if (!std::getline(file, header) || header.rfind(kCkptHeaderPrefix, 0) != 0) {
        throw ParseError("line 1: bad checkpoint header in " + path.string());
    }

    std::string kind_s, dims_s, provenance_s;
    std::int64_t version = -1;
    std::uint64_t seed = 0;
    bool have_seed = false;
    for (std::string_view tok :
         split_fields(std::string_view(header).substr(kCkptHeaderPrefix.size()), ' ')) {
        const std::size_t eq = tok.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("line 1: malformed header token '" + std::string(tok) + "'");
        }
        const std::string_view key = tok.substr(0, eq);
        const std::string_view value = tok.substr(eq + 1);
        if (key == "kind") kind_s = std::string(value);
        else if (key == "version") {
            if (!parse_int64(value, version) || version < 0) {
                throw ParseError("line 1: bad version");
            }
        } else if (key == "dims") dims_s = std::string(value);
        else if (key == "provenance") provenance_s = std::string(value);
        else if (key == "seed") {
            if (!parse_uint64(value, seed)) throw ParseError("line 1: bad seed");
            have_seed = true;
        } else {
            throw ParseError("line 1: unknown header key '" + std::string(key) + "'");
        }
    }
    if (kind_s.empty() || dims_s.empty() || version < 0 || !have_seed) {
        throw ParseError("line 1: checkpoint header is missing required keys");
    }

    WeightCheckpoint ckpt;
    ckpt.kind = detector_kind_from_string(kind_s);
    ckpt.version = version;
    ckpt.rng_seed_used = seed;
    if (!provenance_s.empty()) {
        for (std::string_view tok : split_fields(provenance_s)) {
            std::int64_t v = 0;
            if (!parse_int64(tok, v)) throw ParseError("line 1: bad provenance entry");
            ckpt.provenance.push_back(static_cast<int>(v));
        }
    }

    std::vector<double> values;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        double v = 0.0;
        if (!parse_double(line, v)) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": parameter is not a number");
        }
        values.push_back(v);
    }

    std::size_t cursor = 0;
    auto take = [&](std::size_t count) -> const double* {
        if (cursor + count > values.size()) {
            throw ParseError("checkpoint truncated: expected more parameters");
        }
        const double* ptr = values.data() + cursor;
        cursor += count;
        return ptr;
    };

    if (ckpt.kind == DetectorKind::Reconstruction) {
        AutoencoderParams p;
        for (std::string_view tok : split_fields(dims_s)) {
            std::int64_t d = 0;
            if (!parse_int64(tok, d) || d < 1) throw ParseError("line 1: bad dims");
            p.layer_dims.push_back(static_cast<int>(d));
        }
        check_dims(p.layer_dims);
        for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
            const Eigen::Index rows = p.layer_dims[l + 1];
            const Eigen::Index cols = p.layer_dims[l];
            Eigen::MatrixXd w(rows, cols);
            const double* wv = take(static_cast<std::size_t>(rows * cols));
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < cols; ++c) {
                    w(r, c) = wv[r * cols + c];
                }
            }
            const double* bv = take(static_cast<std::size_t>(rows));
            p.weights.push_back(std::move(w));
            p.biases.push_back(Eigen::Map<const Eigen::VectorXd>(bv, rows));
        }
        ckpt.params = std::move(p);
    } else {
        std::int64_t d = 0;
        if (!parse_int64(dims_s, d) || d < 1) throw ParseError("line 1: bad dims");
        GaussianParams p;
        p.mean = Eigen::Map<const Eigen::VectorXd>(take(static_cast<std::size_t>(d)), d);
        p.variance =
            Eigen::Map<const Eigen::VectorXd>(take(static_cast<std::size_t>(d)), d);
        ckpt.params = std::move(p);
    }
    if (cursor != values.size()) {
        throw ParseError("checkpoint has " + std::to_string(values.size() - cursor) +
                         " trailing parameters");
    }
    return ckpt;
}

}  // namespace streamvad
