#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "streamvad/detectors.hpp"
#include "streamvad/pipeline.hpp"
#include "streamvad/streamgen.hpp"

namespace streamvad {

// Everything an experiment run depends on. Defaults are the bundled
// synthetic scenario; render_config(ExperimentConfig{}) is the canonical
// default config file.
struct ExperimentConfig {
    ScenarioConfig scenario;
    DetectorKind detector = DetectorKind::Reconstruction;
    int window = kDefaultWindowSize;
    int stride = 1;
    int n_subsets = 12;
    double quota_fraction = 0.8;
    double collection_quantile = 0.95;
    Lineage lineage = Lineage::LatestTrained;
    TrainConfig train;          // online fine-tuning
    int offline_epochs = 200;   // convergence budget for the offline cases
    int ae_hidden = 64;
    int ae_bottleneck = 16;
    std::uint64_t seed = 1;

    bool operator==(const ExperimentConfig&) const = default;
};

// Sectioned key-value text: "[section]" headers, "key = value" entries,
// "#" comments, blank lines ignored. Targets live in [target.0], [target.1],
// ... parse(render(c)) == c for every valid config.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);
std::string render_config(const ExperimentConfig& config);
void write_config(const ExperimentConfig& config,
                  const std::filesystem::path& path);

// FNV-1a over the canonical rendering; report metadata.
std::uint64_t config_digest(const ExperimentConfig& config);

}  // namespace streamvad
