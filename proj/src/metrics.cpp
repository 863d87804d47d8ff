#include "streamvad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "streamvad/io_util.hpp"

namespace streamvad {

namespace {

struct SortedSet {
    std::vector<ScoreEntry> entries;  // descending score
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

SortedSet prepare(const BinaryScoreSet& set) {
    SortedSet s;
    s.entries = set.entries;
    for (const ScoreEntry& e : s.entries) {
        if (!std::isfinite(e.score)) {
            throw std::invalid_argument("metrics: non-finite score");
        }
        if (e.positive) ++s.n_pos; else ++s.n_neg;
    }
    if (s.n_pos == 0 || s.n_neg == 0) {
        throw std::invalid_argument("metrics: both classes must be present");
    }
    std::stable_sort(s.entries.begin(), s.entries.end(),
                     [](const ScoreEntry& a, const ScoreEntry& b) {
                         return a.score > b.score;
                     });
    return s;
}

}  // namespace

std::vector<RocPoint> roc_curve(const BinaryScoreSet& set) {
    const SortedSet s = prepare(set);
    const double p = static_cast<double>(s.n_pos);
    const double n = static_cast<double>(s.n_neg);

    std::vector<RocPoint> curve;
    curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0, 1.0});

    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.entries.size();) {
        const double value = s.entries[i].score;
        // consume the whole tie block: thresholds only at distinct values
        while (i < s.entries.size() && s.entries[i].score == value) {
            if (s.entries[i].positive) ++tp; else ++fp;
            ++i;
        }
        const double tpr = static_cast<double>(tp) / p;
        curve.push_back({value, static_cast<double>(fp) / n, tpr, 1.0 - tpr});
    }
    curve.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0, 0.0});
    return curve;
}

std::vector<PrPoint> pr_curve(const BinaryScoreSet& set) {
    const SortedSet s = prepare(set);
    const double p = static_cast<double>(s.n_pos);

    std::vector<PrPoint> curve;
    curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.entries.size();) {
        const double value = s.entries[i].score;
        while (i < s.entries.size() && s.entries[i].score == value) {
            if (s.entries[i].positive) ++tp; else ++fp;
            ++i;
        }
        curve.push_back({value, static_cast<double>(tp) / p,
                         static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }
    return curve;
}

double auc_roc(const BinaryScoreSet& set) {
    const std::vector<RocPoint> curve = roc_curve(set);
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += (curve[i].fpr - curve[i - 1].fpr) *
                (curve[i].tpr + curve[i - 1].tpr) * 0.5;
    }
    return area;
}

double auc_pr(const BinaryScoreSet& set) {
    const std::vector<PrPoint> curve = pr_curve(set);
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += curve[i].precision * (curve[i].recall - curve[i - 1].recall);
    }
    return area;
}

double eer(const BinaryScoreSet& set) {
    const std::vector<RocPoint> curve = roc_curve(set);
    // fpr - fnr runs from -1 at (0,0) to +1 at (1,1); find the sign change
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double diff = curve[i].fpr - curve[i].fnr;
        if (diff == 0.0) return curve[i].fpr;
        if (diff > 0.0) {
            const double prev = curve[i - 1].fpr - curve[i - 1].fnr;
            const double t = -prev / (diff - prev);
            return curve[i - 1].fpr + t * (curve[i].fpr - curve[i - 1].fpr);
        }
    }
    return 1.0;  // unreachable: the final point has diff = +1
}

double retention(double online_metric, double offline_metric) {
    if (!(offline_metric > 0.0)) {
        throw std::invalid_argument("retention: offline metric must be positive");
    }
    return std::round(100.0 * online_metric / offline_metric * 100.0) / 100.0;
}

void write_roc_csv(const std::vector<RocPoint>& curve,
                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "threshold,fpr,tpr\n";
    for (const RocPoint& pt : curve) {
        out << format_double(pt.threshold) << ',' << format_double(pt.fpr) << ','
            << format_double(pt.tpr) << '\n';
    }
}

void write_pr_csv(const std::vector<PrPoint>& curve,
                  const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "threshold,recall,precision\n";
    for (const PrPoint& pt : curve) {
        out << format_double(pt.threshold) << ',' << format_double(pt.recall) << ','
            << format_double(pt.precision) << '\n';
    }
}

}  // namespace streamvad
