#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "streamvad/pose.hpp"

namespace streamvad {

// Camera-view emulation: rotate, scale (with per-axis anisotropy), translate.
struct ViewTransform {
    double rotation = 0.0;  // radians
    double scale = 1.0;
    double tx = 0.0;
    double ty = 0.0;
    double aniso_x = 1.0;
    double aniso_y = 1.0;

    bool operator==(const ViewTransform&) const = default;
};

struct GaitParams {
    double frequency_hz = 1.2;
    double amplitude = 6.0;
    double noise_sigma = 0.3;

    bool operator==(const GaitParams&) const = default;
};

struct DomainSpec {
    std::string domain_id = "domain";
    ViewTransform view;
    GaitParams gait;
    GaitParams anomaly{3.2, 15.0, 0.5};
    double frame_rate = 24.0;

    bool operator==(const DomainSpec&) const = default;
};

// The bundled synthetic setup: an identity-view source domain and one target
// camera whose view rotation/anisotropy and gait tempo are shifted.
DomainSpec default_source_domain();
DomainSpec default_target_domain();

struct ScenarioConfig {
    DomainSpec source = default_source_domain();
    std::vector<DomainSpec> targets{default_target_domain()};
    int n_tracks = 25;  // per domain, before the test split
    int frames_per_track = 120;
    double anomaly_fraction = 0.05;  // of the target stream
    double test_split = 0.2;
    std::uint64_t master_seed = 7;

    bool operator==(const ScenarioConfig&) const = default;
};

enum class TrackKind { Normal, Anomalous };

// Kinematic skeleton walker: sinusoidal limb oscillation around a translating
// root, Gaussian coordinate noise, then the domain's view transform. The
// anomalous kind swaps in anomaly params (faster, larger motion). All frames
// carry the kind as label. Pure function of (spec, kind, length, seed).
std::vector<PoseFrame> gen_track(const DomainSpec& spec, TrackKind kind,
                                 int length, std::uint64_t seed,
                                 const std::string& stream_id,
                                 const std::string& track_id);

// Per-joint rotate, scale, translate. Labels and indices untouched.
std::vector<PoseFrame> apply_view_transform(const ViewTransform& view,
                                            std::vector<PoseFrame> frames);

struct ScenarioFiles {
    std::filesystem::path source_train;
    std::filesystem::path source_test;
    std::vector<std::filesystem::path> target_streams;
    std::vector<std::filesystem::path> target_tests;
    std::filesystem::path manifest;
};

// Emits the full multi-domain setup under dir/streams: anomaly-free source
// training stream, labeled source test stream, and per target an
// anomaly_fraction-contaminated stream plus a labeled test stream whose
// anomalous share is boosted for stable metrics. Byte-deterministic in
// config.master_seed. Also writes a key-value manifest of paths, seeds and
// domain parameters.
ScenarioFiles gen_scenario(const ScenarioConfig& config,
                           const std::filesystem::path& dir);

// File names gen_scenario will produce for this config (without generating).
ScenarioFiles scenario_paths(const ScenarioConfig& config,
                             const std::filesystem::path& dir);

}  // namespace streamvad
