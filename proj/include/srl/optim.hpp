#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "srl/advantage.hpp"
#include "srl/common.hpp"
#include "srl/policy.hpp"
#include "srl/reward.hpp"
#include "srl/rewardmodel.hpp"
#include "srl/synthenv.hpp"

namespace srl {

enum class Algo {
  kGrpoSeq,      // sequence-level reward: R_i = final-step reward only
  kGrpoStepSum,  // sequence-level advantage over R_i = sum of step rewards
  kSrpo,         // step-level discounted advantages
};

enum class OptimizerKind { kSgd, kAdam };

struct ConvergenceConfig {
  int window = 0;  // 0 disables the plateau check
  double tolerance = 0.0;
};

struct TrainConfig {
  Algo algo = Algo::kSrpo;
  int group_size = 16;
  double ratio_clip = 0.2;          // epsilon in the clipped surrogate
  double kl_coefficient = 0.0;      // beta
  double discount = 1.0;            // gamma
  double advantage_epsilon = 1e-4;  // delta in the group normalization
  double advantage_clip = 2.0;
  double learning_rate = 0.9;
  int rollout_batch = 8;
  int iterations = 300;
  double temperature = 0.99;
  int top_k = 100;
  SrpoNormalization srpo_normalization = SrpoNormalization::kRaw;
  bool batch_whitening = false;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  std::uint64_t seed = 1;
  ConvergenceConfig convergence;

  void validate() const;
};

struct SurrogateResult {
  double loss = 0.0;
  // d loss / d new_logprob, aligned with the inputs.
  std::vector<std::vector<double>> dloss_dlogprob;
};

// Clipped-surrogate loss over one group of G rollouts:
//   loss = -(1/G) sum_i (1/|o_i|) sum_t [ min(rho*A, clip(rho,1-eps,1+eps)*A)
//                                          - beta * kl[i][t] ]
// with rho = exp(new - old) per token. Inner sums run over ascending t, outer
// over ascending i. Advantages are used as given (clip them beforehand).
SurrogateResult surrogate_loss(
    const std::vector<std::vector<double>>& new_logprobs,
    const std::vector<std::vector<double>>& old_logprobs,
    const std::vector<std::vector<double>>& advantages, double ratio_clip,
    double kl_coefficient, const std::vector<std::vector<double>>& kl_terms);

// Gradient storage shaped like the policy parameters.
struct PolicyGradient {
  std::array<StepHead, kNumSteps> heads;

  PolicyGradient() = default;
  explicit PolicyGradient(const PolicyParams& like);
};

struct GroupLossResult {
  double loss = 0.0;
  double mean_kl = 0.0;
  PolicyGradient gradient;
};

// Advantage assembly for one rollout group under the configured estimator.
// `sequence` holds the group-normalized total-reward advantages; `per_token`
// is what the loss consumes (token-constant for the grpo variants). Values
// are not yet clipped.
GroupAdvantages compute_group_advantages(
    Algo algo, std::span<const StepRewards> rewards,
    std::span<const std::array<Span, kNumSteps>> spans,
    std::span<const std::size_t> token_counts, double discount,
    SrpoNormalization normalization, double advantage_epsilon);

// Loss and full parameter gradient of the clipped surrogate (with KL penalty
// against `reference`) for one rollout group, evaluated at `params`.
// Advantages must already be clipped.
GroupLossResult group_loss_and_gradient(
    const PolicyParams& params, const PolicyParams& reference,
    const Instance& instance, const std::vector<Rollout>& rollouts,
    const std::vector<std::vector<double>>& advantages, double ratio_clip,
    double kl_coefficient);

struct IterationRecord {
  int iteration = 0;
  std::string stage;
  double mean_total_reward = 0.0;
  double loss = 0.0;
  double mean_kl = 0.0;
  std::array<double, kNumSteps> step_accuracy{};
  std::vector<int> pass_histogram;  // size group_size + 1
};

struct TrainResult {
  PolicyParams params;
  std::vector<IterationRecord> trace;
};

struct TrainOptions {
  // Instance indices eligible for minibatch sampling; empty means the whole
  // dataset. (An explicitly empty pool after filtering must be reported by
  // the caller as curriculum exhaustion before calling train.)
  std::vector<std::size_t> pool;
  std::string stage_name = "main";
  int iteration_offset = 0;
  int budget = -1;  // -1: use config.iterations
  // KL anchor; defaults to the initial policy of this call.
  const PolicyParams* reference = nullptr;
};

// One training run following the grouped-rollout recipe: refresh the old
// policy every iteration, sample G rollouts per minibatch instance, score
// steps, form advantages per `algo`, take one clipped-surrogate step.
// Deterministic for fixed config seeds.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const PolicyParams& init, const VerifierParams* verifier,
                  const RewardConfig& reward_config,
                  const TrainOptions& options = {});

struct EvalRecord {
  std::size_t count = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double good_f1 = 0.0;
  std::array<double, kNumGrades> class_f1{};
  std::array<double, kNumSteps> step_accuracy{};
};

// Greedy decoding over the dataset; grades feed the confusion-matrix
// metrics, every step is also scored against its ground truth. An empty
// dataset yields the zeroed record.
EvalRecord evaluate(const PolicyParams& params, const Dataset& dataset);

Algo algo_from_string(const std::string& name);
std::string to_string(Algo algo);

}  // namespace srl
