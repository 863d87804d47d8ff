#pragma once

#include <filesystem>
#include <vector>

namespace streamvad {

// (score, ground truth) pairs. positive == anomalous. Higher score means
// more anomalous; the classification rule everywhere is
// "positive iff score >= threshold".
struct ScoreEntry {
    double score = 0.0;
    bool positive = false;
};

struct BinaryScoreSet {
    std::vector<ScoreEntry> entries;
};

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    double fnr = 1.0;  // always exactly 1 - tpr
};

struct PrPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 1.0;
};

// One point per distinct score threshold, swept in descending score order,
// bracketed by the (0,0) and (1,1) endpoints. fpr is non-decreasing along
// the curve. Throws std::invalid_argument unless both classes are present.
std::vector<RocPoint> roc_curve(const BinaryScoreSet& set);

std::vector<PrPoint> pr_curve(const BinaryScoreSet& set);

// Trapezoidal area under roc_curve. Equals the tie-corrected pairwise
// statistic P(score_pos > score_neg) + 0.5 * P(equal).
double auc_roc(const BinaryScoreSet& set);

// Non-interpolated step estimator: rectangles at achieved recall over
// descending score order.
double auc_pr(const BinaryScoreSet& set);

// Rate at which fpr == fnr along the ROC sweep, linearly interpolated
// between the bracketing points when the discrete curve has no exact
// crossing.
double eer(const BinaryScoreSet& set);

// 100 * online / offline, rounded to 2 decimals. offline must be > 0.
double retention(double online_metric, double offline_metric);

// Curve dumps for external plotting: "threshold,fpr,tpr" and
// "threshold,recall,precision".
void write_roc_csv(const std::vector<RocPoint>& curve,
                   const std::filesystem::path& path);
void write_pr_csv(const std::vector<PrPoint>& curve,
                  const std::filesystem::path& path);

}  // namespace streamvad
