#pragma once

#include <array>
#include <string>

#include "srl/common.hpp"
#include "srl/policy.hpp"
#include "srl/synthenv.hpp"

namespace srl {

struct VerifierParams;

// Per-step rewards for one rollout. total is always the exact sum of r.
struct StepRewards {
  std::array<double, kNumSteps> r{};
  double total = 0.0;
};

enum class RewardMode { kVerifier, kGroundTruth };

struct RewardConfig {
  std::array<double, kNumSteps> step_coefficients{0.2, 0.2, 0.2, 0.2, 1.0};
  std::array<RewardMode, kNumSteps> mode{
      RewardMode::kVerifier, RewardMode::kVerifier, RewardMode::kGroundTruth,
      RewardMode::kGroundTruth, RewardMode::kGroundTruth};
  double verdict_threshold = 0.5;

  void validate() const;
};

// Deterministic parsing operator: decodes step j (1-based) of the rollout
// into its answer space. Steps 1-2 yield a class id, steps 3-4 yield 0/1,
// step 5 yields a grade in 1..4. Total for any token span: the answer is the
// span's last token reduced into the answer space.
int parse_step(const Rollout& rollout, int step);

// Reference answer for step j of an instance, in the same encoding.
int step_ground_truth(const Instance& instance, int step);

// Eq.-style reward routing: steps in verifier mode are scored by the binary
// verdict of the reward model; ground-truth mode compares against the
// instance's reference answer. Each step's reward is coefficient * {0,1}.
StepRewards hybrid_step_rewards(const Rollout& rollout,
                                const Instance& instance,
                                const VerifierParams* verifier,
                                const RewardConfig& config);

RewardMode reward_mode_from_string(const std::string& name);
std::string to_string(RewardMode mode);

}  // namespace srl
