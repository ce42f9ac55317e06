#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srl/common.hpp"
#include "srl/synthenv.hpp"

namespace srl {

struct StepSpec {
  int id = 0;      // 1..5
  int length = 1;  // tokens emitted by this step
  int vocab = 2;   // symbols available at each of those positions

  bool operator==(const StepSpec&) const = default;
};

struct StepLayout {
  std::array<StepSpec, kNumSteps> steps;

  int max_vocab() const;
  int total_tokens() const;
  std::array<Span, kNumSteps> spans() const;
  bool operator==(const StepLayout&) const = default;
};

// Throws ConfigError unless the layout covers steps 1..5 in order with
// positive lengths and vocabularies.
void validate(const StepLayout& layout);

// Answer-space layout for a generator spec: step vocabularies are
// (query_classes, item_classes, 2, 2, 4).
StepLayout make_step_layout(const GeneratorSpec& spec,
                            const std::array<int, kNumSteps>& lengths);

struct StepHead {
  std::vector<double> weights;  // vocab x context_dim, row-major
  std::vector<double> bias;     // vocab
};

// Log-linear autoregressive policy. The decoding context for the token at
// position p of step j is the concatenation
//   [ instance features | one-hot of the previous token | one-hot of step j |
//     p / length_j ]
// where the previous token is the immediately preceding token of the
// sequence (zeros at the first position) embedded in a max_vocab slot.
struct PolicyParams {
  StepLayout layout;
  int feature_dim = 0;
  std::array<StepHead, kNumSteps> heads;

  int context_dim() const { return feature_dim + layout.max_vocab() + kNumSteps + 1; }
  std::size_t parameter_count() const;

  static PolicyParams zeros(const StepLayout& layout, int feature_dim);
  static PolicyParams random_init(const StepLayout& layout, int feature_dim,
                                  double scale, std::uint64_t seed);
};

struct Rollout {
  std::uint64_t instance_id = 0;
  std::vector<int> tokens;
  std::array<Span, kNumSteps> step_spans;
  std::vector<double> old_logprobs;        // true policy log-probs at sampling
  std::array<int, kNumSteps> parsed_outputs{};  // decoded answer per step
};

// Fills `context` (size params.context_dim()) for the token at `pos_in_step`
// of `step_index` given the previous sequence token (-1 at the start).
void build_context(const PolicyParams& params,
                   std::span<const double> features, int step_index,
                   int pos_in_step, int prev_token, std::span<double> context);

// logits[v] = W_j[v] . context + b_j[v]
void step_logits(const PolicyParams& params, int step_index,
                 std::span<const double> context, std::span<double> logits);

// In-place logits -> log softmax; numerically stable.
void log_softmax_inplace(std::span<double> values);

// Samples G rollouts. Temperature and top-k shape only the sampling
// distribution; old_logprobs always store the untempered, untruncated policy
// log-probability of the sampled token. Deterministic for a fixed rng_seed.
std::vector<Rollout> sample_group(const PolicyParams& params,
                                  const Instance& instance, int group_size,
                                  double temperature, int top_k,
                                  std::uint64_t rng_seed);

// Argmax decode (ties resolved toward the lowest symbol).
Rollout greedy_rollout(const PolicyParams& params, const Instance& instance);

struct TokenGradient {
  int step_index = 0;           // 0-based
  std::vector<double> dweights;  // vocab x context_dim, row-major
  std::vector<double> dbias;     // vocab
};

struct LogprobResult {
  std::vector<double> logprobs;
  std::vector<TokenGradient> gradients;  // empty when with_gradients=false
};

// Per-token log-probabilities of the rollout's tokens under `params`, plus
// the exact gradient of each token's log-probability with respect to that
// step's weights and bias: context (x) (one_hot(token) - softmax).
LogprobResult logprob_and_grad(const PolicyParams& params,
                               const Instance& instance, const Rollout& rollout,
                               bool with_gradients = true);

// Exact KL(pi_params(.|context) || pi_ref(.|context)) by summation over the
// step's vocabulary. Layout mismatch raises ConfigError.
double exact_kl(const PolicyParams& params, const PolicyParams& ref,
                int step_index, std::span<const double> context);

// Same value; also writes d KL / d logits of `params` into dlogits.
double exact_kl_with_grad(const PolicyParams& params, const PolicyParams& ref,
                          int step_index, std::span<const double> context,
                          std::span<double> dlogits);

// KL at every decoding context of the rollout.
std::vector<double> rollout_kls(const PolicyParams& params,
                                const PolicyParams& ref,
                                const Instance& instance,
                                const Rollout& rollout);

// Versioned text checkpoint; round-trips bit-exactly.
void save_policy(const PolicyParams& params, const std::string& path,
                 const std::string& config_hash, std::uint64_t seed);
PolicyParams load_policy(const std::string& path);

}  // namespace srl
