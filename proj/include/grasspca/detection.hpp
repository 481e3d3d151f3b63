#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grasspca/errors.hpp"
#include "grasspca/linalg.hpp"
#include "grasspca/matrix.hpp"
#include "grasspca/pca.hpp"

namespace grasspca {

// Per-feature z-score parameters, fitted on training data only. Population
// standard deviation; constant features get std 1 so they normalize to zero.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  DenseMatrix apply(const DenseMatrix& x) const {
    if (x.rows() != mean.size())
      throw DimensionMismatch("Normalizer::apply: " + std::to_string(x.rows()) +
                              " features vs fitted " + std::to_string(mean.size()));
    DenseMatrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = (out(i, j) - mean[i]) / std[i];
    return out;
  }
};

inline Normalizer fit_normalizer(const DenseMatrix& train) {
  const std::size_t d = train.rows();
  const std::size_t n = train.cols();
  if (n < 2) throw TooFewSamples("fit_normalizer: need at least 2 samples, got " +
                                 std::to_string(n));
  Normalizer norm;
  norm.mean.resize(d);
  norm.std.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < n; ++j) m += train(i, j);
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dev = train(i, j) - m;
      var += dev * dev;
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    norm.mean[i] = m;
    norm.std[i] = sd < 1e-12 ? 1.0 : sd;
  }
  return norm;
}

// Reconstruction-error scores, one per column; anomalies score HIGH.
inline std::vector<double> score_dataset(const Basis& basis, const DenseMatrix& x_normalized) {
  if (x_normalized.rows() != basis.d())
    throw DimensionMismatch("score_dataset: " + std::to_string(x_normalized.rows()) +
                            " features vs basis dimension " + std::to_string(basis.d()));
  std::vector<double> scores(x_normalized.cols());
  std::vector<double> col(basis.d());
  for (std::size_t j = 0; j < x_normalized.cols(); ++j) {
    for (std::size_t i = 0; i < basis.d(); ++i) col[i] = x_normalized(i, j);
    scores[j] = reconstruction_error(basis, col);
  }
  return scores;
}

struct RocPoint {
  double threshold;  // predict anomaly iff score > threshold
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // sorted by fpr, (0,0) first, (1,1) last
  double auc = 0.0;
};

struct PrPoint {
  double threshold;
  double recall;
  double precision;
};

struct PrCurve {
  std::vector<PrPoint> points;  // descending threshold
  double average_precision = 0.0;
};

namespace detail {

struct ScoreGroup {
  double score;
  std::size_t pos;
  std::size_t neg;
};

// distinct scores descending, with per-group class counts
inline std::vector<ScoreGroup> group_scores(const std::vector<double>& scores,
                                            const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw DimensionMismatch("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<ScoreGroup> groups;
  for (std::size_t idx : order) {
    if (groups.empty() || groups.back().score != scores[idx])
      groups.push_back({scores[idx], 0, 0});
    if (labels[idx] == 1)
      ++groups.back().pos;
    else
      ++groups.back().neg;
  }
  return groups;
}

}  // namespace detail

// ROC sweep over every distinct score (ties grouped into one threshold), with
// the (0,0) and (1,1) endpoints; AUC by the trapezoidal rule. The threshold
// attached to each point reproduces it under the "score > threshold" rule.
inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  auto groups = detail::group_scores(scores, labels);
  std::size_t total_pos = 0, total_neg = 0;
  for (const auto& g : groups) {
    total_pos += g.pos;
    total_neg += g.neg;
  }
  if (total_pos == 0 || total_neg == 0)
    throw SingleClass("roc_curve: need both classes present (" + std::to_string(total_pos) +
                      " positives, " + std::to_string(total_neg) + " negatives)");

  RocCurve curve;
  curve.points.reserve(groups.size() + 1);
  std::size_t tp = 0, fp = 0;
  // threshold = highest score flags nothing: the (0,0) endpoint
  curve.points.push_back({groups.front().score, 0.0, 0.0});
  for (std::size_t g = 1; g < groups.size(); ++g) {
    tp += groups[g - 1].pos;
    fp += groups[g - 1].neg;
    curve.points.push_back({groups[g].score,
                            static_cast<double>(fp) / static_cast<double>(total_neg),
                            static_cast<double>(tp) / static_cast<double>(total_pos)});
  }
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});

  double auc = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    auc += 0.5 * (curve.points[i].fpr - curve.points[i - 1].fpr) *
           (curve.points[i].tpr + curve.points[i - 1].tpr);
  curve.auc = auc;
  return curve;
}

// Precision/recall at each distinct threshold, descending by score;
// AP = Σ (R_n − R_{n−1})·P_n.
inline PrCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  auto groups = detail::group_scores(scores, labels);
  std::size_t total_pos = 0;
  for (const auto& g : groups) total_pos += g.pos;
  if (total_pos == 0) throw SingleClass("pr_curve: no positives present");

  PrCurve curve;
  curve.points.reserve(groups.size());
  std::size_t tp = 0, fp = 0;
  double prev_recall = 0.0;
  double ap = 0.0;
  for (const auto& g : groups) {
    tp += g.pos;
    fp += g.neg;
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    curve.points.push_back({g.score, recall, precision});
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  curve.average_precision = ap;
  return curve;
}

// Youden's J = TPR − FPR maximizer; ties break toward the higher threshold
// (fewer alarms).
inline double select_threshold(const RocCurve& roc) {
  if (roc.points.empty()) throw InvalidArgument("select_threshold: empty curve");
  double best_j = -std::numeric_limits<double>::infinity();
  double best_threshold = 0.0;
  for (const RocPoint& p : roc.points) {
    const double j = p.tpr - p.fpr;
    if (j > best_j || (j == best_j && p.threshold > best_threshold)) {
      best_j = j;
      best_threshold = p.threshold;
    }
  }
  return best_threshold;
}

struct DetectionReport {
  double threshold = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fnr = 0.0;
  std::vector<std::pair<double, double>> roc;  // (fpr, tpr)
  std::vector<std::pair<double, double>> pr;   // (recall, precision)
  double auc_roc = 0.0;
  double average_precision = 0.0;
};

// Scalar metric block at a fixed threshold; predict anomaly iff
// score > threshold. Degenerate denominators follow the usual conventions
// (precision 0 when nothing is flagged, f1 0 when precision+recall is 0).
inline DetectionReport compute_metrics(const std::vector<double>& scores,
                                       const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size())
    throw DimensionMismatch("compute_metrics: scores and labels differ in length");
  DetectionReport r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool flagged = scores[i] > threshold;
    const bool anomaly = labels[i] == 1;
    if (flagged && anomaly)
      ++r.tp;
    else if (flagged && !anomaly)
      ++r.fp;
    else if (!flagged && !anomaly)
      ++r.tn;
    else
      ++r.fn;
  }
  const double total = static_cast<double>(scores.size());
  r.accuracy = total > 0 ? static_cast<double>(r.tp + r.tn) / total : 0.0;
  r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp)
                                  : 0.0;
  if (r.tp + r.fn > 0) {
    r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    r.fnr = static_cast<double>(r.fn) / static_cast<double>(r.tp + r.fn);
  }
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

// Full evaluation: ROC-driven threshold (or a caller-fixed one), scalar
// metrics, and both curves.
inline DetectionReport evaluate_detection(const std::vector<double>& scores,
                                          const std::vector<int>& labels,
                                          std::optional<double> fixed_threshold = std::nullopt) {
  RocCurve roc = roc_curve(scores, labels);
  PrCurve pr = pr_curve(scores, labels);
  const double threshold = fixed_threshold ? *fixed_threshold : select_threshold(roc);
  DetectionReport report = compute_metrics(scores, labels, threshold);
  report.auc_roc = roc.auc;
  report.average_precision = pr.average_precision;
  report.roc.reserve(roc.points.size());
  for (const RocPoint& p : roc.points) report.roc.emplace_back(p.fpr, p.tpr);
  report.pr.reserve(pr.points.size());
  for (const PrPoint& p : pr.points) report.pr.emplace_back(p.recall, p.precision);
  return report;
}

}  // namespace grasspca
