#ifndef SARL_METRICS_HPP_
#define SARL_METRICS_HPP_

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarl/tensor.hpp"

namespace sarl {

/// A metric whose denominator is empty, e.g. AP of a class with no positives.
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Sigmoid scores and binary labels, one row per sample.
struct PredictionSet {
  Matrix<double> scores;  // N x C
  Matrix<double> labels;  // N x C, entries 0 or 1

  Index samples() const { return scores.rows(); }
  Index classes() const { return scores.cols(); }
  void validate() const;
};

/// AP of one ranking; ties in score rank the lower index first.
double average_precision(const Vector<double>& scores, const Vector<double>& labels);

struct ApSummary {
  std::vector<double> per_class;  // NaN for skipped classes
  std::vector<Index> skipped;     // classes with no positives
  double map = 0;
};

ApSummary mean_ap(const PredictionSet& preds);

struct PrfScores {
  double cp = 0, cr = 0, cf1 = 0;
  double op = 0, orecall = 0, of1 = 0;
  // Classes whose precision or recall had an empty denominator and was set to 0.
  std::vector<Index> no_predictions;
  std::vector<Index> no_ground_truth;
};

/// Per-class and overall precision/recall/F1 with predictions taken as score >= threshold.
PrfScores prf_threshold(const PredictionSet& preds, double threshold);

/// Same, predicting exactly the k highest-scoring classes of every sample.
PrfScores prf_top_k(const PredictionSet& preds, Index k);

struct MetricReport {
  ApSummary ap;
  PrfScores all;
  PrfScores top;
  double threshold = 0.5;
  Index k = 3;
};

MetricReport evaluate_predictions(const PredictionSet& preds, double threshold = 0.5, Index k = 3);

/// Aligned text table: mAP, then the all-label and top-k rows.
std::string format_table(const MetricReport& report);

/// One `key=value` per line, full precision.
std::string format_key_values(const MetricReport& report);

/// Prediction file: "N C", then per sample C scores followed by C labels.
void write_predictions(std::ostream& out, const PredictionSet& preds);
PredictionSet read_predictions(std::istream& in);

}  // namespace sarl

#endif  // SARL_METRICS_HPP_
