#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace opcnn {

/// Confusion tallies with deceptive (label 1) as the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  /// Same predictions scored with label 0 as the positive class.
  ConfusionCounts swapped() const { return {tn, fn, fp, tp}; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels);

/// A ratio plus a flag set when its denominator was zero (value is then 0).
struct Score {
  double value = 0.0;
  bool degenerate = false;
};

Score precision(const ConfusionCounts& c);
Score recall(const ConfusionCounts& c);
/// Harmonic mean 2PR/(P+R), evaluated on P and R as exact fractions. 0 when
/// TP = 0; degenerate only when there are no positives at all.
Score f1(const ConfusionCounts& c);
/// 2TP/(2TP+FP+FN).
Score f1_counts(const ConfusionCounts& c);
Score accuracy(const ConfusionCounts& c);

/// F_e / F_c. Throws std::domain_error unless F_c > 0.
double accuracy_gain(double experimental, double control);

struct MethodReport {
  std::string method;
  ConfusionCounts counts;
};

/// Header: method,accuracy,precision,recall,f1,accuracy_degenerate,
/// precision_degenerate,recall_degenerate,f1_degenerate
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MethodReport& report);

}  // namespace opcnn
