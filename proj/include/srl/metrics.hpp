#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

#include "srl/common.hpp"

namespace srl {

// 4x4 count matrix over relevance grades, indexed (gold-1, pred-1).
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumGrades>, kNumGrades> counts{};

  void add(int gold_grade, int pred_grade);
  std::int64_t total() const;

  static ConfusionMatrix from_pairs(std::span<const int> gold,
                                    std::span<const int> pred);
};

// One-vs-rest F1 per grade. F1 is 0 when precision + recall is 0.
std::array<double, kNumGrades> per_class_f1(const ConfusionMatrix& cm);

// Binary F1 after merging grades 3 and 4 into the positive class.
double good_f1(const ConfusionMatrix& cm);

// (macro F1, accuracy). An empty matrix yields (0, 0).
std::pair<double, double> macro_f1_and_accuracy(const ConfusionMatrix& cm);

}  // namespace srl
