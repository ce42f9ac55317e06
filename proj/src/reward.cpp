#include "srl/reward.hpp"

#include "srl/rewardmodel.hpp"

namespace srl {

void RewardConfig::validate() const {
  for (double c : step_coefficients) {
    if (c < 0.0) {
      throw ConfigError("reward: step coefficients must be >= 0");
    }
  }
  if (!(verdict_threshold >= 0.0 && verdict_threshold <= 1.0)) {
    throw ConfigError("reward: verdict_threshold must be in [0, 1]");
  }
}

int parse_step(const Rollout& rollout, int step) {
  if (step < 1 || step > kNumSteps) {
    throw DataError("parse_step: step index out of range");
  }
  const Span& span = rollout.step_spans[step - 1];
  int token = rollout.tokens[span.end - 1];
  switch (step) {
    case 1:
    case 2:
      return token;
    case 3:
    case 4:
      return token % 2;
    default:
      return token % kNumGrades + 1;
  }
}

int step_ground_truth(const Instance& instance, int step) {
  switch (step) {
    case 1:
      return instance.gt_query_class;
    case 2:
      return instance.gt_item_class;
    case 3:
      return instance.gt_category_match ? 1 : 0;
    case 4:
      return instance.gt_attribute_match ? 1 : 0;
    case 5:
      return instance.gt_grade;
    default:
      throw DataError("step_ground_truth: step index out of range");
  }
}

StepRewards hybrid_step_rewards(const Rollout& rollout,
                                const Instance& instance,
                                const VerifierParams* verifier,
                                const RewardConfig& config) {
  config.validate();
  StepRewards rewards;
  for (int step = 1; step <= kNumSteps; ++step) {
    int predicted = parse_step(rollout, step);
    bool correct = false;
    if (config.mode[step - 1] == RewardMode::kVerifier) {
      if (verifier == nullptr) {
        throw ConfigError("reward: step " + std::to_string(step) +
                          " routes to the verifier but none was provided");
      }
      correct = verdict(*verifier, instance, step, predicted,
                        config.verdict_threshold)
                    .second;
    } else {
      correct = predicted == step_ground_truth(instance, step);
    }
    rewards.r[step - 1] =
        config.step_coefficients[step - 1] * (correct ? 1.0 : 0.0);
  }
  double total = 0.0;
  for (double v : rewards.r) total += v;
  rewards.total = total;
  return rewards;
}

RewardMode reward_mode_from_string(const std::string& name) {
  if (name == "verifier") return RewardMode::kVerifier;
  if (name == "ground_truth") return RewardMode::kGroundTruth;
  throw ConfigError("reward: unknown mode '" + name + "'");
}

std::string to_string(RewardMode mode) {
  return mode == RewardMode::kVerifier ? "verifier" : "ground_truth";
}

}  // namespace srl
