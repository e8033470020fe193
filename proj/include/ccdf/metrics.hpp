#pragma once

// Change detection scores over the defined pixels of a tri-state reference.
// CHANGED is the positive class.

#include <cstdint>
#include <string>
#include <vector>

#include "ccdf/image.hpp"

namespace ccdf {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) { return a += b; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Counts over pixels whose reference label is not Undefined. Throws
// ShapeError on size mismatch and DegenerateInputError when no pixel is defined.
ConfusionMatrix accumulate_confusion(const BinaryMap& prediction, const ReferenceMap& reference);

// Fractions in [0,1] (kappa in [-1,1]). Ratios with a zero denominator are
// reported as 0 and named in `degenerate`.
struct Metrics {
  double oa = 0.0;
  double kc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double miou = 0.0;
  double ciou = 0.0;
  std::vector<std::string> degenerate;
};

Metrics compute_metrics(const ConfusionMatrix& cm);

// Percent, rounded to two decimals.
double to_percent(double fraction);

// JSON report: the seven scores in percent plus the raw counts.
std::string metrics_report_json(const ConfusionMatrix& cm, const Metrics& m);

}  // namespace ccdf
