#include "streamvad/pose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "streamvad/errors.hpp"
#include "streamvad/io_util.hpp"

namespace streamvad {

namespace {

constexpr std::string_view kStreamHeaderPrefix = "#streamvad-pose v1 K=";
constexpr double kDegenerateDiagonal = 1e-9;

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
    throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

void check_id(const std::string& id, const char* field) {
    if (id.empty() || id.find(',') != std::string::npos ||
        id.find('\n') != std::string::npos) {
        throw std::invalid_argument(std::string(field) +
                                    " must be non-empty and comma-free: '" + id + "'");
    }
}

}  // namespace

std::vector<double> normalize_pose(const PoseFrame& frame) {
    const std::size_t k = frame.joints.size();
    if (k == 0) {
        throw std::invalid_argument("normalize_pose: frame has no joints");
    }
    bool any_confident = false;
    for (const Keypoint& j : frame.joints) {
        if (!std::isfinite(j.x) || !std::isfinite(j.y) || !std::isfinite(j.confidence)) {
            throw std::invalid_argument("normalize_pose: non-finite coordinate");
        }
        if (j.confidence > 0.0) any_confident = true;
    }
    if (!any_confident) {
        throw std::invalid_argument("normalize_pose: all joint confidences are zero");
    }

    double cx = 0.0, cy = 0.0;
    double min_x = frame.joints[0].x, max_x = frame.joints[0].x;
    double min_y = frame.joints[0].y, max_y = frame.joints[0].y;
    for (const Keypoint& j : frame.joints) {
        cx += j.x;
        cy += j.y;
        min_x = std::min(min_x, j.x);
        max_x = std::max(max_x, j.x);
        min_y = std::min(min_y, j.y);
        max_y = std::max(max_y, j.y);
    }
    cx /= static_cast<double>(k);
    cy /= static_cast<double>(k);

    double diag = std::hypot(max_x - min_x, max_y - min_y);
    if (diag < kDegenerateDiagonal) diag = 1.0;

    std::vector<double> out(2 * k);
    for (std::size_t i = 0; i < k; ++i) {
        out[2 * i] = (frame.joints[i].x - cx) / diag;
        out[2 * i + 1] = (frame.joints[i].y - cy) / diag;
    }
    return out;
}

std::vector<PoseWindow> window_stream(std::span<const PoseFrame> track,
                                      int window, int stride) {
    if (window < 1) throw std::invalid_argument("window_stream: window must be >= 1");
    if (stride < 1) throw std::invalid_argument("window_stream: stride must be >= 1");

    std::vector<PoseWindow> windows;
    if (track.empty()) return windows;

    const std::string& stream_id = track.front().stream_id;
    const std::string& track_id = track.front().track_id;
    const std::size_t joint_count = track.front().joints.size();
    for (std::size_t i = 0; i < track.size(); ++i) {
        const PoseFrame& f = track[i];
        if (f.stream_id != stream_id || f.track_id != track_id) {
            throw std::invalid_argument("window_stream: frames span multiple tracks");
        }
        if (f.joints.size() != joint_count) {
            throw std::invalid_argument("window_stream: inconsistent joint count");
        }
        if (i > 0 && f.frame_index <= track[i - 1].frame_index) {
            throw std::invalid_argument(
                "window_stream: frame_index not strictly increasing");
        }
    }

    // maximal gapless runs, then slide within each
    std::size_t run_start = 0;
    for (std::size_t i = 1; i <= track.size(); ++i) {
        const bool run_ends = i == track.size() ||
                              track[i].frame_index != track[i - 1].frame_index + 1;
        if (!run_ends) continue;

        const std::size_t run_len = i - run_start;
        if (run_len >= static_cast<std::size_t>(window)) {
            for (std::size_t off = 0; off + window <= run_len;
                 off += static_cast<std::size_t>(stride)) {
                const std::size_t begin = run_start + off;
                PoseWindow w;
                w.stream_id = stream_id;
                w.track_id = track_id;
                w.start_frame = track[begin].frame_index;
                w.length = window;
                w.features.reserve(2 * joint_count * static_cast<std::size_t>(window));
                for (std::size_t f = begin; f < begin + window; ++f) {
                    const std::vector<double> coords = normalize_pose(track[f]);
                    w.features.insert(w.features.end(), coords.begin(), coords.end());
                    if (track[f].label == FrameLabel::Anomalous) w.anomalous = true;
                }
                windows.push_back(std::move(w));
            }
        }
        run_start = i;
    }
    return windows;
}

std::vector<PoseWindow> segment_stream(std::span<const PoseFrame> frames,
                                       int window, int stride) {
    std::map<std::pair<std::string, std::string>, std::vector<PoseFrame>> tracks;
    for (const PoseFrame& f : frames) {
        tracks[{f.stream_id, f.track_id}].push_back(f);
    }
    std::vector<PoseWindow> all;
    for (auto& [key, track] : tracks) {
        std::vector<PoseWindow> ws = window_stream(track, window, stride);
        all.insert(all.end(), std::make_move_iterator(ws.begin()),
                   std::make_move_iterator(ws.end()));
    }
    std::sort(all.begin(), all.end(), [](const PoseWindow& a, const PoseWindow& b) {
        return std::tie(a.start_frame, a.stream_id, a.track_id) <
               std::tie(b.start_frame, b.stream_id, b.track_id);
    });
    return all;
}

void write_stream(std::span<const PoseFrame> frames,
                  const std::filesystem::path& path, int joint_count) {
    if (joint_count < 0) {
        if (frames.empty()) {
            throw std::invalid_argument(
                "write_stream: joint_count required for an empty stream");
        }
        joint_count = static_cast<int>(frames.front().joints.size());
    }

    std::ostringstream out;
    out << kStreamHeaderPrefix << joint_count << '\n';
    const PoseFrame* prev = nullptr;
    for (const PoseFrame& f : frames) {
        check_id(f.stream_id, "stream_id");
        check_id(f.track_id, "track_id");
        if (f.frame_index < 0) {
            throw std::invalid_argument("write_stream: negative frame_index");
        }
        if (f.joints.size() != static_cast<std::size_t>(joint_count)) {
            throw std::invalid_argument("write_stream: frame has " +
                                        std::to_string(f.joints.size()) +
                                        " joints, expected " +
                                        std::to_string(joint_count));
        }
        if (prev && std::tie(f.frame_index, f.track_id) <=
                        std::tie(prev->frame_index, prev->track_id)) {
            throw std::invalid_argument(
                "write_stream: frames not strictly ordered by (frame_index, track_id)");
        }
        out << f.stream_id << ',' << f.frame_index << ',' << f.track_id << ','
            << static_cast<int>(f.label);
        for (const Keypoint& j : f.joints) {
            out << ',' << format_double(j.x) << ',' << format_double(j.y) << ','
                << format_double(j.confidence);
        }
        out << '\n';
        prev = &f;
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw std::runtime_error("write_stream: cannot open " + path.string());
    }
    file << out.str();
}

std::vector<PoseFrame> read_stream(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw MissingArtifactError("read_stream: cannot open " + path.string());
    }

    std::string line;
    if (!std::getline(file, line)) {
        throw ParseError("line 1: missing header '" +
                         std::string(kStreamHeaderPrefix) + "<K>'");
    }
    if (line.rfind(kStreamHeaderPrefix, 0) != 0) {
        line_error(1, "bad header, expected '" + std::string(kStreamHeaderPrefix) +
                          "<K>', got '" + line + "'");
    }
    std::int64_t joint_count = 0;
    if (!parse_int64(line.substr(kStreamHeaderPrefix.size()), joint_count) ||
        joint_count < 1) {
        line_error(1, "header field K is not a positive integer");
    }

    std::vector<PoseFrame> frames;
    std::size_t line_no = 1;
    std::int64_t prev_frame = -1;
    std::string prev_track;
    bool have_prev = false;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string_view> fields = split_fields(line);
        const std::size_t expected = 4 + 3 * static_cast<std::size_t>(joint_count);
        if (fields.size() != expected) {
            line_error(line_no, "expected " + std::to_string(expected) +
                                    " fields, got " + std::to_string(fields.size()));
        }

        PoseFrame f;
        f.stream_id = std::string(fields[0]);
        if (f.stream_id.empty()) line_error(line_no, "field 'stream_id' is empty");
        if (!parse_int64(fields[1], f.frame_index) || f.frame_index < 0) {
            line_error(line_no, "field 'frame_index' is not a non-negative integer");
        }
        f.track_id = std::string(fields[2]);
        if (f.track_id.empty()) line_error(line_no, "field 'track_id' is empty");
        std::int64_t label = 0;
        if (!parse_int64(fields[3], label) ||
            (label != -1 && label != 0 && label != 1)) {
            line_error(line_no, "field 'label' must be -1, 0 or 1");
        }
        f.label = static_cast<FrameLabel>(label);

        f.joints.resize(static_cast<std::size_t>(joint_count));
        for (std::int64_t j = 0; j < joint_count; ++j) {
            const std::size_t base = 4 + 3 * static_cast<std::size_t>(j);
            Keypoint& kp = f.joints[static_cast<std::size_t>(j)];
            const std::string joint_tag = std::to_string(j + 1);
            if (!parse_double(fields[base], kp.x)) {
                line_error(line_no, "field 'x" + joint_tag + "' is not a number");
            }
            if (!parse_double(fields[base + 1], kp.y)) {
                line_error(line_no, "field 'y" + joint_tag + "' is not a number");
            }
            if (!parse_double(fields[base + 2], kp.confidence)) {
                line_error(line_no, "field 'c" + joint_tag + "' is not a number");
            }
            if (kp.confidence < 0.0 || kp.confidence > 1.0) {
                line_error(line_no, "field 'c" + joint_tag + "' outside [0, 1]");
            }
        }

        if (have_prev && std::tie(f.frame_index, f.track_id) <=
                             std::tie(prev_frame, prev_track)) {
            line_error(line_no,
                       "frames not strictly ordered by (frame_index, track_id)");
        }
        prev_frame = f.frame_index;
        prev_track = f.track_id;
        have_prev = true;
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace streamvad
