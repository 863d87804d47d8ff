#include "streamvad/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "streamvad/errors.hpp"
#include "streamvad/io_util.hpp"

namespace streamvad {

namespace {

std::string lineage_to_string(Lineage lineage) {
    return lineage == Lineage::LatestTrained ? "latest_trained" : "deployed";
}

Lineage lineage_from_string(const std::string& s) {
    if (s == "latest_trained") return Lineage::LatestTrained;
    if (s == "deployed") return Lineage::Deployed;
    throw ConfigError("unknown lineage mode: '" + s + "'");
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

[[noreturn]] void config_error(std::size_t line_no, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
}

// One settable field: a strict parse from the value text into the config.
using Setter = std::function<void(ExperimentConfig&, const std::string&, std::size_t)>;

Setter int_field(int ExperimentConfig::* member) {
    return [member](ExperimentConfig& c, const std::string& v, std::size_t line) {
        std::int64_t out = 0;
        if (!parse_int64(v, out)) config_error(line, "expected an integer, got '" + v + "'");
        c.*member = static_cast<int>(out);
    };
}

Setter double_field(double ExperimentConfig::* member) {
    return [member](ExperimentConfig& c, const std::string& v, std::size_t line) {
        double out = 0.0;
        if (!parse_double(v, out)) config_error(line, "expected a number, got '" + v + "'");
        c.*member = out;
    };
}

void set_domain_field(DomainSpec& d, const std::string& key, const std::string& value,
                      std::size_t line) {
    if (key == "id") {
        d.domain_id = value;
        return;
    }
    double out = 0.0;
    if (!parse_double(value, out)) {
        config_error(line, "expected a number for '" + key + "', got '" + value + "'");
    }
    if (key == "rotation") d.view.rotation = out;
    else if (key == "scale") d.view.scale = out;
    else if (key == "tx") d.view.tx = out;
    else if (key == "ty") d.view.ty = out;
    else if (key == "aniso_x") d.view.aniso_x = out;
    else if (key == "aniso_y") d.view.aniso_y = out;
    else if (key == "gait_frequency_hz") d.gait.frequency_hz = out;
    else if (key == "gait_amplitude") d.gait.amplitude = out;
    else if (key == "gait_noise_sigma") d.gait.noise_sigma = out;
    else if (key == "anomaly_frequency_hz") d.anomaly.frequency_hz = out;
    else if (key == "anomaly_amplitude") d.anomaly.amplitude = out;
    else if (key == "anomaly_noise_sigma") d.anomaly.noise_sigma = out;
    else if (key == "frame_rate") d.frame_rate = out;
    else config_error(line, "unknown domain key '" + key + "'");
}

void render_domain(std::ostringstream& out, const std::string& section,
                   const DomainSpec& d) {
    out << '[' << section << "]\n";
    out << "id = " << d.domain_id << '\n';
    out << "rotation = " << format_double(d.view.rotation) << '\n';
    out << "scale = " << format_double(d.view.scale) << '\n';
    out << "tx = " << format_double(d.view.tx) << '\n';
    out << "ty = " << format_double(d.view.ty) << '\n';
    out << "aniso_x = " << format_double(d.view.aniso_x) << '\n';
    out << "aniso_y = " << format_double(d.view.aniso_y) << '\n';
    out << "gait_frequency_hz = " << format_double(d.gait.frequency_hz) << '\n';
    out << "gait_amplitude = " << format_double(d.gait.amplitude) << '\n';
    out << "gait_noise_sigma = " << format_double(d.gait.noise_sigma) << '\n';
    out << "anomaly_frequency_hz = " << format_double(d.anomaly.frequency_hz) << '\n';
    out << "anomaly_amplitude = " << format_double(d.anomaly.amplitude) << '\n';
    out << "anomaly_noise_sigma = " << format_double(d.anomaly.noise_sigma) << '\n';
    out << "frame_rate = " << format_double(d.frame_rate) << '\n';
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    bool targets_reset = false;

    static const std::map<std::string, Setter> experiment_keys = {
        {"detector",
         [](ExperimentConfig& c, const std::string& v, std::size_t line) {
             try {
                 c.detector = detector_kind_from_string(v);
             } catch (const std::invalid_argument& e) {
                 config_error(line, e.what());
             }
         }},
        {"window", int_field(&ExperimentConfig::window)},
        {"stride", int_field(&ExperimentConfig::stride)},
        {"n_subsets", int_field(&ExperimentConfig::n_subsets)},
        {"quota_fraction", double_field(&ExperimentConfig::quota_fraction)},
        {"collection_quantile", double_field(&ExperimentConfig::collection_quantile)},
        {"lineage",
         [](ExperimentConfig& c, const std::string& v, std::size_t line) {
             try {
                 c.lineage = lineage_from_string(v);
             } catch (const ConfigError& e) {
                 config_error(line, e.what());
             }
         }},
        {"offline_epochs", int_field(&ExperimentConfig::offline_epochs)},
        {"ae_hidden", int_field(&ExperimentConfig::ae_hidden)},
        {"ae_bottleneck", int_field(&ExperimentConfig::ae_bottleneck)},
        {"seed",
         [](ExperimentConfig& c, const std::string& v, std::size_t line) {
             if (!parse_uint64(v, c.seed)) config_error(line, "expected a seed");
         }},
    };

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int target_index = -1;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']') config_error(line_no, "unterminated section header");
            section = std::string(line.substr(1, line.size() - 2));
            if (section.rfind("target.", 0) == 0) {
                std::int64_t idx = -1;
                if (!parse_int64(section.substr(7), idx) || idx < 0) {
                    config_error(line_no, "bad target section '" + section + "'");
                }
                if (!targets_reset) {
                    config.scenario.targets.clear();
                    targets_reset = true;
                }
                if (idx != static_cast<std::int64_t>(config.scenario.targets.size())) {
                    config_error(line_no, "target sections must be consecutive from 0");
                }
                config.scenario.targets.push_back(default_target_domain());
                target_index = static_cast<int>(idx);
            } else if (section != "experiment" && section != "train" &&
                       section != "scenario" && section != "source") {
                config_error(line_no, "unknown section '[" + section + "]'");
            }
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            config_error(line_no, "expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) config_error(line_no, "empty key");

        if (section == "experiment") {
            const auto it = experiment_keys.find(key);
            if (it == experiment_keys.end()) {
                config_error(line_no, "unknown key '" + key + "' in [experiment]");
            }
            it->second(config, value, line_no);
        } else if (section == "train") {
            std::int64_t iv = 0;
            double dv = 0.0;
            if (key == "epochs") {
                if (!parse_int64(value, iv)) config_error(line_no, "expected an integer");
                config.train.epochs = static_cast<int>(iv);
            } else if (key == "batch_size") {
                if (!parse_int64(value, iv)) config_error(line_no, "expected an integer");
                config.train.batch_size = static_cast<int>(iv);
            } else if (key == "learning_rate") {
                if (!parse_double(value, dv)) config_error(line_no, "expected a number");
                config.train.learning_rate = dv;
            } else if (key == "adaptation_rate") {
                if (!parse_double(value, dv)) config_error(line_no, "expected a number");
                config.train.adaptation_rate = dv;
            } else {
                config_error(line_no, "unknown key '" + key + "' in [train]");
            }
        } else if (section == "scenario") {
            std::int64_t iv = 0;
            double dv = 0.0;
            if (key == "master_seed") {
                if (!parse_uint64(value, config.scenario.master_seed)) {
                    config_error(line_no, "expected a seed");
                }
            } else if (key == "n_tracks") {
                if (!parse_int64(value, iv)) config_error(line_no, "expected an integer");
                config.scenario.n_tracks = static_cast<int>(iv);
            } else if (key == "frames_per_track") {
                if (!parse_int64(value, iv)) config_error(line_no, "expected an integer");
                config.scenario.frames_per_track = static_cast<int>(iv);
            } else if (key == "anomaly_fraction") {
                if (!parse_double(value, dv)) config_error(line_no, "expected a number");
                config.scenario.anomaly_fraction = dv;
            } else if (key == "test_split") {
                if (!parse_double(value, dv)) config_error(line_no, "expected a number");
                config.scenario.test_split = dv;
            } else {
                config_error(line_no, "unknown key '" + key + "' in [scenario]");
            }
        } else if (section == "source") {
            set_domain_field(config.scenario.source, key, value, line_no);
        } else if (target_index >= 0 && section == "target." + std::to_string(target_index)) {
            set_domain_field(config.scenario.targets.back(), key, value, line_no);
        } else {
            config_error(line_no, "key outside any section");
        }
    }

    if (config.scenario.targets.empty()) {
        throw ConfigError("config declares no target domains");
    }
    return config;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open config: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string render_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "# streamvad experiment configuration\n";
    out << "[experiment]\n";
    out << "detector = " << to_string(c.detector) << '\n';
    out << "window = " << c.window << '\n';
    out << "stride = " << c.stride << '\n';
    out << "n_subsets = " << c.n_subsets << '\n';
    out << "quota_fraction = " << format_double(c.quota_fraction) << '\n';
    out << "collection_quantile = " << format_double(c.collection_quantile) << '\n';
    out << "lineage = " << lineage_to_string(c.lineage) << '\n';
    out << "offline_epochs = " << c.offline_epochs << '\n';
    out << "ae_hidden = " << c.ae_hidden << '\n';
    out << "ae_bottleneck = " << c.ae_bottleneck << '\n';
    out << "seed = " << c.seed << '\n';
    out << '\n';
    out << "[train]\n";
    out << "epochs = " << c.train.epochs << '\n';
    out << "learning_rate = " << format_double(c.train.learning_rate) << '\n';
    out << "batch_size = " << c.train.batch_size << '\n';
    out << "adaptation_rate = " << format_double(c.train.adaptation_rate) << '\n';
    out << '\n';
    out << "[scenario]\n";
    out << "master_seed = " << c.scenario.master_seed << '\n';
    out << "n_tracks = " << c.scenario.n_tracks << '\n';
    out << "frames_per_track = " << c.scenario.frames_per_track << '\n';
    out << "anomaly_fraction = " << format_double(c.scenario.anomaly_fraction) << '\n';
    out << "test_split = " << format_double(c.scenario.test_split) << '\n';
    out << '\n';
    render_domain(out, "source", c.scenario.source);
    for (std::size_t i = 0; i < c.scenario.targets.size(); ++i) {
        out << '\n';
        render_domain(out, "target." + std::to_string(i), c.scenario.targets[i]);
    }
    return out.str();
}

void write_config(const ExperimentConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_config: cannot open " + path.string());
    out << render_config(config);
}

std::uint64_t config_digest(const ExperimentConfig& config) {
    return fnv1a(render_config(config));
}

}  // namespace streamvad
