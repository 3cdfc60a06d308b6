#include "sarl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sarl {

namespace {

double harmonic(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

// `predicted` is N x C with entries 0 or 1.
PrfScores prf_from_predictions(const PredictionSet& preds, const Matrix<double>& predicted) {
  const Index c = preds.classes();
  PrfScores out;
  double correct_all = 0, predicted_all = 0, truth_all = 0;
  double precision_sum = 0, recall_sum = 0;
  for (Index j = 0; j < c; ++j) {
    const double correct = predicted.col(j).cwiseProduct(preds.labels.col(j)).sum();
    const double npred = predicted.col(j).sum();
    const double ntruth = preds.labels.col(j).sum();
    if (npred == 0) out.no_predictions.push_back(j);
    if (ntruth == 0) out.no_ground_truth.push_back(j);
    precision_sum += ratio(correct, npred);
    recall_sum += ratio(correct, ntruth);
    correct_all += correct;
    predicted_all += npred;
    truth_all += ntruth;
  }
  out.cp = precision_sum / static_cast<double>(c);
  out.cr = recall_sum / static_cast<double>(c);
  out.cf1 = harmonic(out.cp, out.cr);
  out.op = ratio(correct_all, predicted_all);
  out.orecall = ratio(correct_all, truth_all);
  out.of1 = harmonic(out.op, out.orecall);
  return out;
}

}  // namespace

void PredictionSet::validate() const {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols()) {
    throw DimensionError("predictions: scores and labels differ in shape");
  }
  for (Index i = 0; i < labels.size(); ++i) {
    const double v = labels.data()[i];
    if (v != 0.0 && v != 1.0) throw DimensionError("predictions: labels must be 0 or 1");
  }
}

double average_precision(const Vector<double>& scores, const Vector<double>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("average_precision: length mismatch");
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
  double hits = 0, sum = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] > 0.5) {
      hits += 1;
      sum += hits / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) throw MetricError("average_precision: no positive labels");
  return sum / hits;
}

ApSummary mean_ap(const PredictionSet& preds) {
  preds.validate();
  ApSummary out;
  double total = 0;
  Index used = 0;
  for (Index j = 0; j < preds.classes(); ++j) {
    if (preds.labels.col(j).sum() == 0) {
      out.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      out.skipped.push_back(j);
      continue;
    }
    const double ap = average_precision(preds.scores.col(j), preds.labels.col(j));
    out.per_class.push_back(ap);
    total += ap;
    ++used;
  }
  if (used == 0) throw MetricError("mean_ap: no class has a positive label");
  out.map = total / static_cast<double>(used);
  return out;
}

PrfScores prf_threshold(const PredictionSet& preds, double threshold) {
  preds.validate();
  Matrix<double> predicted = (preds.scores.array() >= threshold).cast<double>().matrix();
  return prf_from_predictions(preds, predicted);
}

PrfScores prf_top_k(const PredictionSet& preds, Index k) {
  preds.validate();
  if (k < 1 || k > preds.classes()) throw DimensionError("prf_top_k: k must lie in [1, C]");
  Matrix<double> predicted = Matrix<double>::Zero(preds.samples(), preds.classes());
  for (Index i = 0; i < preds.samples(); ++i) {
    Vector<double> row = preds.scores.row(i).transpose();
    for (Index j : topk_indices(row, k)) predicted(i, j) = 1.0;
  }
  return prf_from_predictions(preds, predicted);
}

MetricReport evaluate_predictions(const PredictionSet& preds, double threshold, Index k) {
  MetricReport r;
  r.ap = mean_ap(preds);
  r.all = prf_threshold(preds, threshold);
  r.k = std::min(k, preds.classes());
  r.top = prf_top_k(preds, r.k);
  r.threshold = threshold;
  return r;
}

std::string format_table(const MetricReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "mAP " << 100 * report.ap.map << "\n";
  out << std::left << std::setw(8) << "mode" << std::right;
  for (const char* h : {"CP", "CR", "CF1", "OP", "OR", "OF1"}) out << std::setw(8) << h;
  out << "\n";
  auto row = [&](const std::string& name, const PrfScores& s) {
    out << std::left << std::setw(8) << name << std::right;
    for (double v : {s.cp, s.cr, s.cf1, s.op, s.orecall, s.of1}) out << std::setw(8) << 100 * v;
    out << "\n";
  };
  row("all", report.all);
  row("top-" + std::to_string(report.k), report.top);
  for (Index c : report.ap.skipped) out << "warning: class " << c << " has no positives, excluded from mAP\n";
  return out.str();
}

std::string format_key_values(const MetricReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "mAP=" << report.ap.map << "\n";
  for (std::size_t c = 0; c < report.ap.per_class.size(); ++c) out << "AP." << c << "=" << report.ap.per_class[c] << "\n";
  auto block = [&](const std::string& prefix, const PrfScores& s) {
    out << prefix << ".CP=" << s.cp << "\n" << prefix << ".CR=" << s.cr << "\n" << prefix << ".CF1=" << s.cf1 << "\n";
    out << prefix << ".OP=" << s.op << "\n" << prefix << ".OR=" << s.orecall << "\n" << prefix << ".OF1=" << s.of1 << "\n";
  };
  block("all", report.all);
  block("top" + std::to_string(report.k), report.top);
  out << "threshold=" << report.threshold << "\n";
  return out.str();
}

void write_predictions(std::ostream& out, const PredictionSet& preds) {
  preds.validate();
  out << preds.samples() << " " << preds.classes() << "\n" << std::setprecision(17);
  for (Index i = 0; i < preds.samples(); ++i) {
    for (Index j = 0; j < preds.classes(); ++j) out << preds.scores(i, j) << " ";
    for (Index j = 0; j < preds.classes(); ++j) out << static_cast<int>(preds.labels(i, j)) << (j + 1 < preds.classes() ? " " : "");
    out << "\n";
  }
}

PredictionSet read_predictions(std::istream& in) {
  Index n = 0, c = 0;
  if (!(in >> n >> c) || n < 0 || c < 1) throw DimensionError("prediction file: bad header");
  PredictionSet p{Matrix<double>(n, c), Matrix<double>(n, c)};
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < c; ++j)
      if (!(in >> p.scores(i, j))) throw DimensionError("prediction file: truncated at sample " + std::to_string(i));
    for (Index j = 0; j < c; ++j)
      if (!(in >> p.labels(i, j))) throw DimensionError("prediction file: truncated at sample " + std::to_string(i));
  }
  p.validate();
  return p;
}

}  // namespace sarl
