#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "srl/common.hpp"
#include "srl/policy.hpp"
#include "srl/reward.hpp"
#include "srl/synthenv.hpp"

namespace srl {

struct VerifierHyper {
  double learning_rate = 0.25;
  int epochs = 800;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

struct VerifierHead {
  // Weight layout: [bias | features | one-hot(candidate) |
  //                 one-hot(candidate) (x) features].
  // The interaction block lets the head score a candidate against the
  // feature coordinates that candidate selects.
  std::vector<double> weights;
};

// Per-step logistic verifier standing in for the generative step reward
// model: verdict(q, p, y_hat_j) in {0,1} with a calibrated probability.
struct VerifierParams {
  int feature_dim = 0;
  std::array<int, kNumSteps> vocab{};  // candidate-space size per step
  std::array<VerifierHead, kNumSteps> heads;
  int epochs = 0;
  std::uint64_t seed = 0;

  std::size_t head_dim(int step_index) const;
};

// One supervised example: was candidate `candidate` a correct answer for
// step `step` (1-based) of instance `instance_id`?
struct StepJudgment {
  std::uint64_t instance_id = 0;
  int step = 1;
  int candidate = 0;
  bool correct = false;
};

// Full-batch gradient descent on cross-entropy + L2, one head per step.
// Deterministic for a fixed seed; judgments are canonically ordered first so
// the result is invariant under input permutation. A step whose judgments
// carry only one label raises TrainingError naming the step. When
// loss_history is given it receives the per-epoch training loss of each head.
VerifierParams train_verifier(
    const Dataset& dataset, const std::vector<StepJudgment>& judgments,
    const VerifierHyper& hyper,
    std::array<std::vector<double>, kNumSteps>* loss_history = nullptr);

// (probability, probability >= threshold).
std::pair<double, bool> verdict(const VerifierParams& verifier,
                                const Instance& instance, int step,
                                int candidate, double threshold = 0.5);

// Uniformly samples `candidates_per_step` candidate answers per step per
// instance and labels them against the ground truth. Deterministic per seed.
std::vector<StepJudgment> synthesize_judgments(const Dataset& dataset,
                                               int candidates_per_step,
                                               std::uint64_t seed);

// Scores one greedy rollout per instance: steps 1-2 through the verifier,
// steps 3-5 against ground truth. Returns the `budget` instance ids with the
// most flagged steps; ties break toward the lower id.
std::vector<std::uint64_t> rm_select(const VerifierParams& verifier,
                                     const Dataset& dataset,
                                     const PolicyParams& policy,
                                     std::size_t budget,
                                     double threshold = 0.5);

void save_verifier(const VerifierParams& verifier, const std::string& path,
                   const std::string& config_hash, std::uint64_t seed);
VerifierParams load_verifier(const std::string& path);

void save_judgments(const std::vector<StepJudgment>& judgments,
                    const std::string& path, const std::string& config_hash,
                    std::uint64_t seed);
std::vector<StepJudgment> load_judgments(const std::string& path);

}  // namespace srl
