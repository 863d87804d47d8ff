#include "streamvad/streamgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "streamvad/io_util.hpp"
#include "streamvad/rng.hpp"

namespace streamvad {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kStrideGain = 1.5;     // root speed = gain * amplitude * f / fps
constexpr double kBobGain = 0.15;       // vertical bob, double frequency
constexpr double kTestAnomalousShare = 0.4;  // boosted share in test streams

// COCO-17 layout: base offset around the hip midpoint, swing gain along x,
// swing phase (legs antiphase, arms counter-swinging).
struct JointMotif {
    double base_x;
    double base_y;
    double swing_gain;
    double swing_phase;
};

constexpr std::array<JointMotif, 17> kSkeleton = {{
    {0.0, -54.0, 0.0, 0.0},    // nose
    {-3.0, -57.0, 0.0, 0.0},   // left eye
    {3.0, -57.0, 0.0, 0.0},    // right eye
    {-6.0, -55.0, 0.0, 0.0},   // left ear
    {6.0, -55.0, 0.0, 0.0},    // right ear
    {-12.0, -40.0, 0.1, kTwoPi / 2},  // left shoulder
    {12.0, -40.0, 0.1, 0.0},          // right shoulder
    {-16.0, -22.0, 0.4, kTwoPi / 2},  // left elbow
    {16.0, -22.0, 0.4, 0.0},          // right elbow
    {-17.0, -4.0, 0.7, kTwoPi / 2},   // left wrist
    {17.0, -4.0, 0.7, 0.0},           // right wrist
    {-8.0, 0.0, 0.1, 0.0},            // left hip
    {8.0, 0.0, 0.1, kTwoPi / 2},      // right hip
    {-9.0, 28.0, 0.5, 0.0},           // left knee
    {9.0, 28.0, 0.5, kTwoPi / 2},     // right knee
    {-9.0, 56.0, 1.0, 0.0},           // left ankle
    {9.0, 56.0, 1.0, kTwoPi / 2},     // right ankle
}};

void check_spec(const DomainSpec& spec) {
    if (!(spec.view.scale > 0.0) || !(spec.view.aniso_x > 0.0) ||
        !(spec.view.aniso_y > 0.0)) {
        throw std::invalid_argument("domain spec: scale factors must be positive");
    }
    for (const GaitParams* g : {&spec.gait, &spec.anomaly}) {
        if (!(g->frequency_hz > 0.0)) {
            throw std::invalid_argument("domain spec: frequency must be positive");
        }
        if (g->noise_sigma < 0.0) {
            throw std::invalid_argument("domain spec: noise sigma must be >= 0");
        }
    }
    if (!(spec.frame_rate > 0.0)) {
        throw std::invalid_argument("domain spec: frame rate must be positive");
    }
    if (spec.gait == spec.anomaly) {
        throw std::invalid_argument(
            "domain spec: anomaly params must differ from gait params");
    }
}

// Evenly spread ordinals of the anomalous tracks in a stream.
std::vector<bool> anomalous_mask(int n_tracks, int n_anomalous) {
    std::vector<bool> mask(static_cast<std::size_t>(n_tracks), false);
    if (n_anomalous <= 0) return mask;
    const double step = static_cast<double>(n_tracks) / n_anomalous;
    for (int i = 0; i < n_anomalous; ++i) {
        auto idx = static_cast<std::size_t>((i + 0.5) * step);
        mask[std::min(idx, mask.size() - 1)] = true;
    }
    return mask;
}

std::string track_name(int ordinal) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "t%03d", ordinal);
    return buf;
}

std::vector<PoseFrame> gen_stream(const DomainSpec& spec, int n_tracks,
                                  int n_anomalous, int length,
                                  std::uint64_t stream_seed,
                                  const std::string& stream_id) {
    const std::vector<bool> mask = anomalous_mask(n_tracks, n_anomalous);
    std::vector<PoseFrame> frames;
    frames.reserve(static_cast<std::size_t>(n_tracks) * length);
    for (int t = 0; t < n_tracks; ++t) {
        const TrackKind kind = mask[static_cast<std::size_t>(t)]
                                   ? TrackKind::Anomalous
                                   : TrackKind::Normal;
        std::vector<PoseFrame> track =
            gen_track(spec, kind, length, mix_seed(stream_seed, static_cast<std::uint64_t>(t)),
                      stream_id, track_name(t));
        frames.insert(frames.end(), std::make_move_iterator(track.begin()),
                      std::make_move_iterator(track.end()));
    }
    std::sort(frames.begin(), frames.end(),
              [](const PoseFrame& a, const PoseFrame& b) {
                  return std::tie(a.frame_index, a.track_id) <
                         std::tie(b.frame_index, b.track_id);
              });
    return frames;
}

void append_domain(std::ostringstream& out, const std::string& prefix,
                   const DomainSpec& spec) {
    out << prefix << ".id = " << spec.domain_id << '\n';
    out << prefix << ".rotation = " << format_double(spec.view.rotation) << '\n';
    out << prefix << ".scale = " << format_double(spec.view.scale) << '\n';
    out << prefix << ".tx = " << format_double(spec.view.tx) << '\n';
    out << prefix << ".ty = " << format_double(spec.view.ty) << '\n';
    out << prefix << ".aniso_x = " << format_double(spec.view.aniso_x) << '\n';
    out << prefix << ".aniso_y = " << format_double(spec.view.aniso_y) << '\n';
    out << prefix << ".gait_frequency_hz = " << format_double(spec.gait.frequency_hz) << '\n';
    out << prefix << ".gait_amplitude = " << format_double(spec.gait.amplitude) << '\n';
    out << prefix << ".gait_noise_sigma = " << format_double(spec.gait.noise_sigma) << '\n';
    out << prefix << ".anomaly_frequency_hz = " << format_double(spec.anomaly.frequency_hz) << '\n';
    out << prefix << ".anomaly_amplitude = " << format_double(spec.anomaly.amplitude) << '\n';
    out << prefix << ".anomaly_noise_sigma = " << format_double(spec.anomaly.noise_sigma) << '\n';
    out << prefix << ".frame_rate = " << format_double(spec.frame_rate) << '\n';
}

}  // namespace

DomainSpec default_source_domain() {
    DomainSpec s;
    s.domain_id = "source";
    return s;
}

DomainSpec default_target_domain() {
    DomainSpec t;
    t.domain_id = "cam0";
    t.view.rotation = 0.35;
    t.view.scale = 1.4;
    t.view.tx = 60.0;
    t.view.ty = -35.0;
    t.view.aniso_x = 1.25;
    t.view.aniso_y = 0.85;
    t.gait.frequency_hz = 1.55;
    t.gait.amplitude = 7.5;
    t.gait.noise_sigma = 0.35;
    return t;
}

std::vector<PoseFrame> gen_track(const DomainSpec& spec, TrackKind kind,
                                 int length, std::uint64_t seed,
                                 const std::string& stream_id,
                                 const std::string& track_id) {
    check_spec(spec);
    if (length < 1) throw std::invalid_argument("gen_track: length must be >= 1");

    const GaitParams& g = kind == TrackKind::Anomalous ? spec.anomaly : spec.gait;
    const FrameLabel label =
        kind == TrackKind::Anomalous ? FrameLabel::Anomalous : FrameLabel::Normal;

    Rng rng(seed);
    const double phase = rng.uniform(0.0, kTwoPi);
    const double omega = kTwoPi * g.frequency_hz / spec.frame_rate;
    const double speed = kStrideGain * g.amplitude * g.frequency_hz / spec.frame_rate;
    const double root_x0 = rng.uniform(0.0, 200.0);
    const double root_y0 = rng.uniform(0.0, 100.0);

    std::vector<PoseFrame> frames;
    frames.reserve(static_cast<std::size_t>(length));
    for (int t = 0; t < length; ++t) {
        PoseFrame f;
        f.stream_id = stream_id;
        f.track_id = track_id;
        f.frame_index = t;
        f.label = label;
        f.joints.resize(kSkeleton.size());

        const double theta = omega * t + phase;
        const double root_x = root_x0 + speed * t;
        const double root_y = root_y0 + kBobGain * g.amplitude * std::sin(2.0 * theta);
        for (std::size_t j = 0; j < kSkeleton.size(); ++j) {
            const JointMotif& m = kSkeleton[j];
            Keypoint& kp = f.joints[j];
            kp.x = root_x + m.base_x +
                   m.swing_gain * g.amplitude * std::sin(theta + m.swing_phase) +
                   g.noise_sigma * rng.normal();
            kp.y = root_y + m.base_y + g.noise_sigma * rng.normal();
            kp.confidence = rng.uniform(0.6, 1.0);
        }
        frames.push_back(std::move(f));
    }
    return apply_view_transform(spec.view, std::move(frames));
}

std::vector<PoseFrame> apply_view_transform(const ViewTransform& view,
                                            std::vector<PoseFrame> frames) {
    const double cos_r = std::cos(view.rotation);
    const double sin_r = std::sin(view.rotation);
    for (PoseFrame& f : frames) {
        for (Keypoint& kp : f.joints) {
            if (!std::isfinite(kp.x) || !std::isfinite(kp.y)) {
                throw std::invalid_argument("apply_view_transform: non-finite coordinate");
            }
            const double rx = cos_r * kp.x - sin_r * kp.y;
            const double ry = sin_r * kp.x + cos_r * kp.y;
            kp.x = view.aniso_x * view.scale * rx + view.tx;
            kp.y = view.aniso_y * view.scale * ry + view.ty;
        }
    }
    return frames;
}

ScenarioFiles scenario_paths(const ScenarioConfig& config,
                             const std::filesystem::path& dir) {
    ScenarioFiles files;
    files.source_train = dir / "source_train.csv";
    files.source_test = dir / "source_test.csv";
    for (std::size_t d = 0; d < config.targets.size(); ++d) {
        files.target_streams.push_back(dir / ("target" + std::to_string(d) + ".csv"));
        files.target_tests.push_back(dir / ("target" + std::to_string(d) + "_test.csv"));
    }
    files.manifest = dir / "manifest.txt";
    return files;
}

ScenarioFiles gen_scenario(const ScenarioConfig& config,
                           const std::filesystem::path& dir) {
    check_spec(config.source);
    for (const DomainSpec& t : config.targets) check_spec(t);
    if (config.targets.empty()) {
        throw std::invalid_argument("gen_scenario: at least one target domain");
    }
    if (config.n_tracks < 2 || config.frames_per_track < 1) {
        throw std::invalid_argument("gen_scenario: bad track counts");
    }
    if (config.anomaly_fraction < 0.0 || config.anomaly_fraction >= 0.5) {
        throw std::invalid_argument("gen_scenario: anomaly_fraction outside [0, 0.5)");
    }
    if (config.test_split <= 0.0 || config.test_split >= 1.0) {
        throw std::invalid_argument("gen_scenario: test_split outside (0, 1)");
    }

    const int test_tracks = std::max(
        1, static_cast<int>(std::lround(config.n_tracks * config.test_split)));
    const int main_tracks = config.n_tracks - test_tracks;
    if (main_tracks < 1) {
        throw std::invalid_argument("gen_scenario: test split leaves no stream tracks");
    }
    const int test_anomalous = std::max(
        1, static_cast<int>(std::lround(test_tracks * kTestAnomalousShare)));
    const int stream_anomalous =
        static_cast<int>(std::lround(main_tracks * config.anomaly_fraction));

    std::filesystem::create_directories(dir);
    const ScenarioFiles files = scenario_paths(config, dir);

    write_stream(gen_stream(config.source, main_tracks, 0, config.frames_per_track,
                            mix_seed(config.master_seed, 0), "source_train"),
                 files.source_train, kDefaultJointCount);
    write_stream(gen_stream(config.source, test_tracks, test_anomalous,
                            config.frames_per_track, mix_seed(config.master_seed, 1),
                            "source_test"),
                 files.source_test, kDefaultJointCount);
    for (std::size_t d = 0; d < config.targets.size(); ++d) {
        const std::string name = "target" + std::to_string(d);
        write_stream(gen_stream(config.targets[d], main_tracks, stream_anomalous,
                                config.frames_per_track,
                                mix_seed(config.master_seed, 2 + 2 * d), name),
                     files.target_streams[d], kDefaultJointCount);
        write_stream(gen_stream(config.targets[d], test_tracks, test_anomalous,
                                config.frames_per_track,
                                mix_seed(config.master_seed, 3 + 2 * d), name + "_test"),
                     files.target_tests[d], kDefaultJointCount);
    }

    std::ostringstream manifest;
    manifest << "master_seed = " << config.master_seed << '\n';
    manifest << "n_tracks = " << config.n_tracks << '\n';
    manifest << "frames_per_track = " << config.frames_per_track << '\n';
    manifest << "anomaly_fraction = " << format_double(config.anomaly_fraction) << '\n';
    manifest << "test_split = " << format_double(config.test_split) << '\n';
    manifest << "source_train = " << files.source_train.filename().string() << '\n';
    manifest << "source_test = " << files.source_test.filename().string() << '\n';
    for (std::size_t d = 0; d < config.targets.size(); ++d) {
        manifest << "target" << d
                 << "_stream = " << files.target_streams[d].filename().string() << '\n';
        manifest << "target" << d
                 << "_test = " << files.target_tests[d].filename().string() << '\n';
    }
    append_domain(manifest, "source", config.source);
    for (std::size_t d = 0; d < config.targets.size(); ++d) {
        append_domain(manifest, "target" + std::to_string(d), config.targets[d]);
    }
    std::ofstream mf(files.manifest, std::ios::binary | std::ios::trunc);
    if (!mf) throw std::runtime_error("gen_scenario: cannot open manifest");
    mf << manifest.str();

    return files;
}

}  // namespace streamvad
