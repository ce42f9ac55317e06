#pragma once

#include <array>
#include <span>
#include <vector>

#include "srl/common.hpp"
#include "srl/reward.hpp"

namespace srl {

// Group-normalized sequence-level advantages:
//   A_i = (R_i - mean({R})) / (std({R}) + delta)
// std is the population standard deviation (divide by G). A zero-variance
// group yields all zeros.
std::vector<double> grpo_advantages(std::span<const double> rewards,
                                    double delta);

// Step-level advantages: every token of step j receives the discounted sum
// of that step's and all later steps' rewards,
//   A(t) = sum_{k=j..J} gamma^(k-j) * r[k].
std::vector<double> srpo_token_advantages(const StepRewards& rewards,
                                          const std::array<Span, kNumSteps>& spans,
                                          double gamma);

enum class SrpoNormalization {
  kRaw,           // discounted sums exactly as written
  kGroupPerStep,  // each step's rewards centered/scaled across the group first
};

// Applies the SRPO estimator to a whole rollout group. In kGroupPerStep mode
// every r[k] is replaced by its group-normalized value before discounting.
std::vector<std::vector<double>> srpo_group_advantages(
    std::span<const StepRewards> group,
    std::span<const std::array<Span, kNumSteps>> spans, double gamma,
    SrpoNormalization normalization, double delta);

// Elementwise clamp to [-magnitude, magnitude].
std::vector<double> clip_advantages(std::vector<double> values,
                                    double magnitude);

// Advantages for one rollout group plus the group reward statistics.
struct GroupAdvantages {
  std::vector<double> sequence;                // per-rollout A_i
  std::vector<std::vector<double>> per_token;  // per-rollout A_i(t)
  double reward_mean = 0.0;
  double reward_std = 0.0;
};

}  // namespace srl
