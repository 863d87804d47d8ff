#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace streamvad {

constexpr int kDefaultJointCount = 17;
constexpr int kDefaultWindowSize = 24;

enum class FrameLabel : int { Normal = 0, Anomalous = 1, Unknown = -1 };

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double confidence = 1.0;

    bool operator==(const Keypoint&) const = default;
};

// One tracked skeleton at one frame. Immutable after construction by
// convention; every operation below returns fresh values.
struct PoseFrame {
    std::string stream_id;
    std::int64_t frame_index = 0;
    std::string track_id;
    std::vector<Keypoint> joints;
    FrameLabel label = FrameLabel::Unknown;

    bool operator==(const PoseFrame&) const = default;
};

// Fixed-length temporal slice of one track, flattened to a feature vector.
// Feature layout: frame-major, joints in index order, (x, y) interleaved,
// so features.size() == 2 * K * length. Confidence is dropped after
// normalization.
struct PoseWindow {
    std::string stream_id;
    std::string track_id;
    std::int64_t start_frame = 0;
    int length = 0;
    std::vector<double> features;
    bool anomalous = false;
    int subset_index = 0;  // assigned by partition_stream

    bool operator==(const PoseWindow&) const = default;
};

// Translation- and scale-invariant joint coordinates: centroid moved to the
// origin, then divided by the joint bounding-box diagonal (divisor 1 when the
// diagonal is below 1e-9). Returns 2K values, (x, y) interleaved.
// Throws std::invalid_argument on non-finite input or all-zero confidence.
std::vector<double> normalize_pose(const PoseFrame& frame);

// Sliding windows over the frames of one track. Frames must be sorted by
// frame_index and share one (stream_id, track_id). Windows never straddle a
// gap in frame_index; a gapless run of N frames yields
// max(0, floor((N - window) / stride) + 1) windows. A window is anomalous iff
// any member frame is.
std::vector<PoseWindow> window_stream(std::span<const PoseFrame> track,
                                      int window, int stride = 1);

// Windows for every track of a mixed stream, sorted back into stream order
// (start_frame, then stream_id, then track_id).
std::vector<PoseWindow> segment_stream(std::span<const PoseFrame> frames,
                                       int window, int stride = 1);

// Line-delimited pose stream file.
//   header:  #streamvad-pose v1 K=<K>
//   record:  stream_id,frame_index,track_id,label,x1,y1,c1,...,xK,yK,cK
// label is 0 = normal, 1 = anomalous, -1 = unknown. Lines are ordered by
// (frame_index, track_id) and floats use shortest round-trip form, so
// write-read-write is byte identical.
void write_stream(std::span<const PoseFrame> frames,
                  const std::filesystem::path& path,
                  int joint_count = -1);  // -1: take from first frame

// Throws ParseError naming the 1-based line number and offending field.
std::vector<PoseFrame> read_stream(const std::filesystem::path& path);

}  // namespace streamvad
