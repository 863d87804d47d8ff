#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "streamvad/detectors.hpp"
#include "streamvad/errors.hpp"
#include "streamvad/rng.hpp"
#include "streamvad/streamgen.hpp"

using namespace streamvad;

namespace {

// Plain-loop forward pass, kept independent of the Eigen implementation.
std::vector<double> oracle_forward(const AutoencoderParams& p,
                                   const std::vector<double>& input) {
    std::vector<double> h = input;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        std::vector<double> next(static_cast<std::size_t>(p.weights[l].rows()));
        for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
            double acc = p.biases[l](r);
            for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) {
                acc += p.weights[l](r, c) * h[static_cast<std::size_t>(c)];
            }
            next[static_cast<std::size_t>(r)] =
                l + 1 < p.weights.size() ? std::tanh(acc) : acc;
        }
        h = std::move(next);
    }
    return h;
}

double oracle_score(const AutoencoderParams& p, const std::vector<double>& input) {
    const std::vector<double> y = oracle_forward(p, input);
    double sum = 0.0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double d = y[i] - input[i];
        sum += d * d;
    }
    return sum / static_cast<double>(input.size());
}

double batch_loss(const AutoencoderParams& p, const Eigen::MatrixXd& batch) {
    double total = 0.0;
    for (Eigen::Index c = 0; c < batch.cols(); ++c) {
        std::vector<double> x(batch.rows());
        Eigen::Map<Eigen::VectorXd>(x.data(), batch.rows()) = batch.col(c);
        total += ae_score(p, x);
    }
    return total / static_cast<double>(batch.cols());
}

Eigen::MatrixXd random_batch(Rng& rng, int dim, int count) {
    Eigen::MatrixXd m(dim, count);
    for (Eigen::Index c = 0; c < count; ++c) {
        for (Eigen::Index r = 0; r < dim; ++r) {
            m(r, c) = rng.uniform(-1.0, 1.0);
        }
    }
    return m;
}

bool bitwise_equal(const AutoencoderParams& a, const AutoencoderParams& b) {
    if (a.layer_dims != b.layer_dims) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        if ((a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff() != 0.0) return false;
        if ((a.biases[l] - b.biases[l]).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
}

// 200 windows of synthetic gait, the bundled training-progress fixture
Eigen::MatrixXd gait_training_set() {
    const DomainSpec spec = default_source_domain();
    const auto frames = gen_track(spec, TrackKind::Normal, 223, 99, "fit", "t0");
    const auto windows = window_stream(frames, kDefaultWindowSize, 1);
    REQUIRE(windows.size() == 200);
    return features_matrix(windows);
}

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "streamvad_detector_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("ae_init determinism, bound and zero biases") {
    const std::vector<int> dims = {8, 4, 2, 4, 8};
    const AutoencoderParams a = ae_init(dims, 1);
    const AutoencoderParams b = ae_init(dims, 1);
    CHECK(bitwise_equal(a, b));

    const double bound = std::sqrt(6.0 / 12.0);  // widest layer pair is 8+4
    for (const auto& w : a.weights) {
        CHECK(w.cwiseAbs().maxCoeff() <= bound);
    }
    for (const auto& bias : a.biases) {
        CHECK(bias.cwiseAbs().maxCoeff() == 0.0);
    }

    CHECK_THROWS_AS((void)ae_init({8, 0, 8}, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)ae_init({8, 4, 6}, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)ae_init({8, 8, 8}, 1), std::invalid_argument);
}

TEST_CASE("ae_score forced values on the zero network") {
    AutoencoderParams p = ae_init({8, 4, 2, 4, 8}, 2);
    for (auto& w : p.weights) w.setZero();

    const std::vector<double> zeros(8, 0.0);
    CHECK(ae_score(p, zeros) == 0.0);

    const std::vector<double> ones(8, 1.0);
    CHECK(ae_score(p, ones) == doctest::Approx(1.0));

    CHECK_THROWS_AS((void)ae_score(p, std::vector<double>(7, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("ae_score matches the plain-loop oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const AutoencoderParams p = ae_init({6, 5, 3, 5, 6}, 100 + trial);
        std::vector<double> x(6);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        CHECK(std::abs(ae_score(p, x) - oracle_score(p, x)) < 1e-12);
    }
}

TEST_CASE("ae_grad vanishes at a reconstruction fixed point") {
    // zero weights and an output bias equal to the sample: y == x, loss 0
    AutoencoderParams p = ae_init({6, 4, 2, 4, 6}, 3);
    for (auto& w : p.weights) w.setZero();
    Eigen::MatrixXd batch(6, 1);
    batch.col(0) << 0.3, -0.2, 0.5, 0.0, -0.7, 0.1;
    p.biases.back() = batch.col(0);

    const AeGradient g = ae_grad(p, batch);
    double norm = 0.0;
    for (const auto& w : g.weights) norm += w.squaredNorm();
    for (const auto& b : g.biases) norm += b.squaredNorm();
    CHECK(std::sqrt(norm) < 1e-8);
}

TEST_CASE("ae_grad matches central finite differences") {
    Rng rng(22);
    const double h = 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 4 + static_cast<int>(rng.index(4));
        const int hidden = 3 + static_cast<int>(rng.index(3));
        const int bottleneck = 2;
        AutoencoderParams p = ae_init({d, hidden, bottleneck, hidden, d},
                                      500 + static_cast<std::uint64_t>(trial));
        const Eigen::MatrixXd batch =
            random_batch(rng, d, 1 + static_cast<int>(rng.index(4)));
        const AeGradient g = ae_grad(p, batch);

        auto check_coord = [&](double& param, double analytic) {
            const double saved = param;
            param = saved + h;
            const double up = batch_loss(p, batch);
            param = saved - h;
            const double down = batch_loss(p, batch);
            param = saved;
            const double fd = (up - down) / (2.0 * h);
            CHECK(std::abs(analytic - fd) <=
                  std::max(1e-8, 1e-4 * std::max(std::abs(analytic), std::abs(fd))));
        };

        for (std::size_t l = 0; l < p.weights.size(); ++l) {
            for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
                for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) {
                    check_coord(p.weights[l](r, c), g.weights[l](r, c));
                }
                check_coord(p.biases[l](r), g.biases[l](r));
            }
        }
    }
}

TEST_CASE("ae_grad is invariant to duplicating the batch") {
    Rng rng(23);
    const AutoencoderParams p = ae_init({6, 4, 2, 4, 6}, 42);
    const Eigen::MatrixXd batch = random_batch(rng, 6, 5);
    Eigen::MatrixXd doubled(6, 10);
    doubled << batch, batch;

    const AeGradient a = ae_grad(p, batch);
    const AeGradient b = ae_grad(p, doubled);
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        CHECK((a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((a.biases[l] - b.biases[l]).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("ae_train with zero learning rate is a no-op") {
    const Eigen::MatrixXd data = gait_training_set();
    const int d = static_cast<int>(data.rows());
    const AutoencoderParams p = ae_init({d, 64, 16, 64, d}, 7);
    TrainConfig config;
    config.learning_rate = 0.0;
    config.epochs = 3;
    const AeTrainResult result = ae_train(p, data, config, 11);
    CHECK(bitwise_equal(result.params, p));
    REQUIRE(result.epoch_loss.size() == 3);
    CHECK(result.epoch_loss[0] == result.epoch_loss[2]);
}

TEST_CASE("ae_train descends on the gait fixture with the default config") {
    const Eigen::MatrixXd data = gait_training_set();
    const int d = static_cast<int>(data.rows());
    const AutoencoderParams p = ae_init({d, 64, 16, 64, d}, 8);
    const TrainConfig config;  // epochs=20, lr=1e-2, batch=32
    const AeTrainResult result = ae_train(p, data, config, 12);
    REQUIRE(result.epoch_loss.size() == 20);
    CHECK(result.epoch_loss.back() < result.epoch_loss.front());

    const AeTrainResult again = ae_train(p, data, config, 12);
    CHECK(bitwise_equal(result.params, again.params));

    CHECK_THROWS_AS((void)ae_train(p, Eigen::MatrixXd(data.rows(), 0), config, 1),
                    std::invalid_argument);
}

TEST_CASE("gaussian_fit hand example and degenerate clamp") {
    Eigen::MatrixXd data(2, 2);
    data.col(0) << 0.0, 0.0;
    data.col(1) << 2.0, 2.0;
    const GaussianParams p = gaussian_fit(data);
    CHECK(p.mean(0) == doctest::Approx(1.0));
    CHECK(p.mean(1) == doctest::Approx(1.0));
    CHECK(p.variance(0) == doctest::Approx(1.0));  // population variance
    CHECK(p.variance(1) == doctest::Approx(1.0));

    Eigen::MatrixXd constant(3, 5);
    constant.colwise() = Eigen::Vector3d(0.4, -0.1, 2.0);
    const GaussianParams q = gaussian_fit(constant);
    CHECK(q.mean(0) == doctest::Approx(0.4));
    for (int i = 0; i < 3; ++i) CHECK(q.variance(i) == kVarianceFloor);

    CHECK_THROWS_AS((void)gaussian_fit(Eigen::MatrixXd(2, 1)), std::invalid_argument);
}

TEST_CASE("gaussian_fit is permutation invariant") {
    Rng rng(24);
    Eigen::MatrixXd data = random_batch(rng, 4, 12);
    Eigen::MatrixXd reversed(4, 12);
    for (int c = 0; c < 12; ++c) reversed.col(c) = data.col(11 - c);
    const GaussianParams a = gaussian_fit(data);
    const GaussianParams b = gaussian_fit(reversed);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.variance - b.variance).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gaussian_score closed form and minimum at the mean") {
    GaussianParams p;
    p.mean = Eigen::Vector2d(1.0, 1.0);
    p.variance = Eigen::Vector2d(1.0, 1.0);
    const std::vector<double> at_mean = {1.0, 1.0};
    CHECK(gaussian_score(p, at_mean) ==
          doctest::Approx(std::log(2.0 * M_PI)).epsilon(1e-12));

    Rng rng(25);
    const double base = gaussian_score(p, at_mean);
    for (int trial = 0; trial < 50; ++trial) {
        const std::vector<double> x = {1.0 + rng.uniform(-3.0, 3.0),
                                       1.0 + rng.uniform(-3.0, 3.0)};
        CHECK(gaussian_score(p, x) >= base);
    }

    // independent literal-formula evaluation
    GaussianParams q;
    q.mean = Eigen::Vector3d(0.3, -1.2, 4.0);
    q.variance = Eigen::Vector3d(0.5, 2.0, 1.3);
    const std::vector<double> x = {1.0, 0.0, 3.5};
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double diff = x[static_cast<std::size_t>(i)] - q.mean(i);
        expect += 0.5 * (std::log(2.0 * M_PI * q.variance(i)) +
                         diff * diff / q.variance(i));
    }
    CHECK(std::abs(gaussian_score(q, x) - expect) < 1e-12);

    CHECK_THROWS_AS((void)gaussian_score(q, std::vector<double>(2, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("fine_tune likelihood boundaries and lineage") {
    Rng rng(26);
    const Eigen::MatrixXd data = random_batch(rng, 3, 20);

    WeightCheckpoint source;
    source.kind = DetectorKind::Likelihood;
    source.version = 4;
    source.provenance = {0, 1, 2};
    GaussianParams g;
    g.mean = Eigen::Vector3d(0.0, 0.0, 0.0);
    g.variance = Eigen::Vector3d(1.0, 1.0, 1.0);
    source.params = g;

    TrainConfig config;
    config.adaptation_rate = 0.0;
    const WeightCheckpoint frozen = fine_tune(source, data, config, 3, 77);
    CHECK(frozen.version == 5);
    CHECK(frozen.provenance == std::vector<int>{0, 1, 2, 3});
    CHECK((frozen.gaussian().mean - g.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((frozen.gaussian().variance - g.variance).cwiseAbs().maxCoeff() == 0.0);

    config.adaptation_rate = 1.0;
    const WeightCheckpoint refit = fine_tune(source, data, config, 3, 77);
    const GaussianParams direct = gaussian_fit(data);
    CHECK((refit.gaussian().mean - direct.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((refit.gaussian().variance - direct.variance).cwiseAbs().maxCoeff() == 0.0);

    config.adaptation_rate = 0.5;
    const WeightCheckpoint mixed = fine_tune(source, data, config, 3, 77);
    CHECK((mixed.gaussian().mean - 0.5 * direct.mean).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS((void)fine_tune(source, Eigen::MatrixXd(3, 0), config, 3, 1),
                    std::invalid_argument);
}

TEST_CASE("fine_tune reconstruction with zero learning rate keeps params") {
    WeightCheckpoint source;
    source.kind = DetectorKind::Reconstruction;
    source.version = 0;
    source.params = ae_init({6, 4, 2, 4, 6}, 5);

    Rng rng(27);
    const Eigen::MatrixXd data = random_batch(rng, 6, 10);
    TrainConfig config;
    config.learning_rate = 0.0;
    config.epochs = 2;
    const WeightCheckpoint tuned = fine_tune(source, data, config, 0, 9);
    CHECK(tuned.version == 1);
    CHECK(tuned.provenance == std::vector<int>{0});
    CHECK(bitwise_equal(tuned.ae(), source.ae()));
}

TEST_CASE("checkpoint files round trip exactly") {
    WeightCheckpoint ae_ckpt;
    ae_ckpt.kind = DetectorKind::Reconstruction;
    ae_ckpt.version = 3;
    ae_ckpt.provenance = {0, 1};
    ae_ckpt.rng_seed_used = 12345;
    ae_ckpt.params = ae_init({6, 4, 2, 4, 6}, 55);

    const auto ae_path = temp_file("ae.ckpt");
    write_checkpoint(ae_ckpt, ae_path);
    const WeightCheckpoint ae_back = read_checkpoint(ae_path);
    CHECK(ae_back.kind == ae_ckpt.kind);
    CHECK(ae_back.version == ae_ckpt.version);
    CHECK(ae_back.provenance == ae_ckpt.provenance);
    CHECK(ae_back.rng_seed_used == ae_ckpt.rng_seed_used);
    CHECK(bitwise_equal(ae_back.ae(), ae_ckpt.ae()));

    WeightCheckpoint g_ckpt;
    g_ckpt.kind = DetectorKind::Likelihood;
    g_ckpt.version = 7;
    g_ckpt.rng_seed_used = 42;
    GaussianParams g;
    g.mean = Eigen::Vector3d(0.1, -2.5, 3.25e-7);
    g.variance = Eigen::Vector3d(1.0, 0.5, 1e-6);
    g_ckpt.params = g;

    const auto g_path = temp_file("gaussian.ckpt");
    write_checkpoint(g_ckpt, g_path);
    const WeightCheckpoint g_back = read_checkpoint(g_path);
    CHECK((g_back.gaussian().mean - g.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g_back.gaussian().variance - g.variance).cwiseAbs().maxCoeff() == 0.0);

    // malformed: truncated parameter list
    {
        std::ofstream out(temp_file("bad.ckpt"));
        out << "#streamvad-ckpt v1 kind=likelihood version=0 dims=3 provenance= seed=1\n";
        out << "0.5\n0.5\n";
    }
    CHECK_THROWS_AS((void)read_checkpoint(temp_file("bad.ckpt")), ParseError);

    {
        std::ofstream out(temp_file("bad2.ckpt"));
        out << "#streamvad-ckpt v1 kind=likelihood version=0 dims=1 provenance= seed=1\n";
        out << "0.5\nnot_a_number\n";
    }
    CHECK_THROWS_WITH_AS((void)read_checkpoint(temp_file("bad2.ckpt")),
                         doctest::Contains("line 3"), ParseError);
}

TEST_CASE("score_window dispatch and dimension checks") {
    WeightCheckpoint ckpt;
    ckpt.kind = DetectorKind::Likelihood;
    GaussianParams g;
    g.mean = Eigen::Vector2d(0.0, 0.0);
    g.variance = Eigen::Vector2d(1.0, 1.0);
    ckpt.params = g;

    PoseWindow w;
    w.features = {0.0, 0.0};
    CHECK(score_window(ckpt, w.features) ==
          doctest::Approx(std::log(2.0 * M_PI)).epsilon(1e-12));

    w.features = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS((void)score_window(ckpt, w.features), std::invalid_argument);
}
