#include "srl/metrics.hpp"

#include <string>

namespace srl {

namespace {

double f1_from_counts(double tp, double fp, double fn) {
  double denom = 2.0 * tp + fp + fn;
  if (denom == 0.0) return 0.0;
  return 2.0 * tp / denom;
}

}  // namespace

void ConfusionMatrix::add(int gold_grade, int pred_grade) {
  if (gold_grade < 1 || gold_grade > kNumGrades || pred_grade < 1 ||
      pred_grade > kNumGrades) {
    throw DataError("confusion matrix: grade out of range: gold=" +
                    std::to_string(gold_grade) +
                    " pred=" + std::to_string(pred_grade));
  }
  ++counts[gold_grade - 1][pred_grade - 1];
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (const auto& row : counts) {
    for (std::int64_t c : row) n += c;
  }
  return n;
}

ConfusionMatrix ConfusionMatrix::from_pairs(std::span<const int> gold,
                                            std::span<const int> pred) {
  if (gold.size() != pred.size()) {
    throw DataError("confusion matrix: gold/pred length mismatch");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    cm.add(gold[i], pred[i]);
  }
  return cm;
}

std::array<double, kNumGrades> per_class_f1(const ConfusionMatrix& cm) {
  std::array<double, kNumGrades> f1{};
  for (int c = 0; c < kNumGrades; ++c) {
    double tp = static_cast<double>(cm.counts[c][c]);
    double fp = 0.0;
    double fn = 0.0;
    for (int k = 0; k < kNumGrades; ++k) {
      if (k == c) continue;
      fp += static_cast<double>(cm.counts[k][c]);
      fn += static_cast<double>(cm.counts[c][k]);
    }
    f1[c] = f1_from_counts(tp, fp, fn);
  }
  return f1;
}

double good_f1(const ConfusionMatrix& cm) {
  auto positive = [](int grade_index) { return grade_index >= 2; };
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  for (int g = 0; g < kNumGrades; ++g) {
    for (int p = 0; p < kNumGrades; ++p) {
      double n = static_cast<double>(cm.counts[g][p]);
      if (positive(g) && positive(p)) tp += n;
      if (!positive(g) && positive(p)) fp += n;
      if (positive(g) && !positive(p)) fn += n;
    }
  }
  return f1_from_counts(tp, fp, fn);
}

std::pair<double, double> macro_f1_and_accuracy(const ConfusionMatrix& cm) {
  std::int64_t n = cm.total();
  if (n == 0) return {0.0, 0.0};
  auto f1 = per_class_f1(cm);
  double macro = 0.0;
  for (double v : f1) macro += v;
  macro /= static_cast<double>(kNumGrades);
  std::int64_t diag = 0;
  for (int c = 0; c < kNumGrades; ++c) diag += cm.counts[c][c];
  double accuracy = static_cast<double>(diag) / static_cast<double>(n);
  return {macro, accuracy};
}

}  // namespace srl
