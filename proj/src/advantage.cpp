#include "srl/advantage.hpp"

#include <algorithm>
#include <cmath>

namespace srl {

std::vector<double> grpo_advantages(std::span<const double> rewards,
                                    double delta) {
  if (rewards.size() < 2) {
    throw ConfigError("grpo_advantages: need a group of at least 2 rewards");
  }
  if (!(delta > 0.0)) {
    throw ConfigError("grpo_advantages: delta must be > 0");
  }
  // A uniform group carries no relative signal; short-circuit to exact
  // zeros so rounding in the mean cannot leak through the small delta.
  bool uniform_group = true;
  for (double r : rewards) {
    if (r != rewards[0]) {
      uniform_group = false;
      break;
    }
  }
  if (uniform_group) {
    return std::vector<double>(rewards.size(), 0.0);
  }

  double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  double std_dev = std::sqrt(var);
  std::vector<double> advantages(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    advantages[i] = (rewards[i] - mean) / (std_dev + delta);
  }
  return advantages;
}

std::vector<double> srpo_token_advantages(
    const StepRewards& rewards, const std::array<Span, kNumSteps>& spans,
    double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("srpo_token_advantages: gamma must be in (0, 1]");
  }
  std::vector<double> advantages(spans[kNumSteps - 1].end, 0.0);
  for (int j = 0; j < kNumSteps; ++j) {
    double value = 0.0;
    double weight = 1.0;
    for (int k = j; k < kNumSteps; ++k) {
      value += weight * rewards.r[k];
      weight *= gamma;
    }
    for (std::size_t t = spans[j].begin; t < spans[j].end; ++t) {
      advantages[t] = value;
    }
  }
  return advantages;
}

std::vector<std::vector<double>> srpo_group_advantages(
    std::span<const StepRewards> group,
    std::span<const std::array<Span, kNumSteps>> spans, double gamma,
    SrpoNormalization normalization, double delta) {
  if (group.size() != spans.size()) {
    throw DataError("srpo_group_advantages: group/spans size mismatch");
  }
  std::vector<std::vector<double>> advantages;
  advantages.reserve(group.size());

  if (normalization == SrpoNormalization::kRaw) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      advantages.push_back(srpo_token_advantages(group[i], spans[i], gamma));
    }
    return advantages;
  }

  // Group-per-step mode: normalize each step's rewards across the group,
  // then apply the same discounted suffix sums.
  std::vector<StepRewards> normalized(group.begin(), group.end());
  std::vector<double> column(group.size());
  for (int j = 0; j < kNumSteps; ++j) {
    for (std::size_t i = 0; i < group.size(); ++i) column[i] = group[i].r[j];
    std::vector<double> norm = grpo_advantages(column, delta);
    for (std::size_t i = 0; i < group.size(); ++i) normalized[i].r[j] = norm[i];
  }
  for (std::size_t i = 0; i < group.size(); ++i) {
    double total = 0.0;
    for (double v : normalized[i].r) total += v;
    normalized[i].total = total;
    advantages.push_back(srpo_token_advantages(normalized[i], spans[i], gamma));
  }
  return advantages;
}

std::vector<double> clip_advantages(std::vector<double> values,
                                    double magnitude) {
  if (!(magnitude > 0.0)) {
    throw ConfigError("clip_advantages: magnitude must be > 0");
  }
  for (double& v : values) v = std::clamp(v, -magnitude, magnitude);
  return values;
}

}  // namespace srl
