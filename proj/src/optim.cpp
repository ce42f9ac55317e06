#include "srl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "srl/metrics.hpp"
#include "srl/rng.hpp"

namespace srl {

void TrainConfig::validate() const {
  if (group_size < 2) throw ConfigError("train: group_size must be >= 2");
  if (!(ratio_clip > 0.0 && ratio_clip < 1.0)) {
    throw ConfigError("train: ratio_clip must be in (0, 1)");
  }
  if (kl_coefficient < 0.0) {
    throw ConfigError("train: kl_coefficient must be >= 0");
  }
  if (!(discount > 0.0 && discount <= 1.0)) {
    throw ConfigError("train: discount must be in (0, 1]");
  }
  if (!(advantage_epsilon > 0.0)) {
    throw ConfigError("train: advantage_epsilon must be > 0");
  }
  if (!(advantage_clip > 0.0)) {
    throw ConfigError("train: advantage_clip must be > 0");
  }
  if (!(learning_rate > 0.0)) {
    throw ConfigError("train: learning_rate must be > 0");
  }
  if (rollout_batch < 1) throw ConfigError("train: rollout_batch must be >= 1");
  if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("train: temperature must be > 0");
  if (top_k < 1) throw ConfigError("train: top_k must be >= 1");
  if (convergence.window < 0 || convergence.tolerance < 0.0) {
    throw ConfigError("train: invalid convergence settings");
  }
}

SurrogateResult surrogate_loss(
    const std::vector<std::vector<double>>& new_logprobs,
    const std::vector<std::vector<double>>& old_logprobs,
    const std::vector<std::vector<double>>& advantages, double ratio_clip,
    double kl_coefficient, const std::vector<std::vector<double>>& kl_terms) {
  std::size_t group = new_logprobs.size();
  if (group == 0 || old_logprobs.size() != group ||
      advantages.size() != group || kl_terms.size() != group) {
    throw DataError("surrogate_loss: group size mismatch");
  }
  SurrogateResult result;
  result.dloss_dlogprob.resize(group);
  double total = 0.0;
  double inv_group = 1.0 / static_cast<double>(group);
  for (std::size_t i = 0; i < group; ++i) {
    std::size_t length = new_logprobs[i].size();
    if (old_logprobs[i].size() != length || advantages[i].size() != length ||
        kl_terms[i].size() != length) {
      throw DataError("surrogate_loss: token sequence length mismatch");
    }
    if (length == 0) {
      throw DataError("surrogate_loss: empty token sequence");
    }
    result.dloss_dlogprob[i].assign(length, 0.0);
    double inv_length = 1.0 / static_cast<double>(length);
    double inner = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
      double rho = std::exp(new_logprobs[i][t] - old_logprobs[i][t]);
      double a = advantages[i][t];
      double unclipped = rho * a;
      double clipped =
          std::clamp(rho, 1.0 - ratio_clip, 1.0 + ratio_clip) * a;
      inner += std::min(unclipped, clipped) - kl_coefficient * kl_terms[i][t];
      // The clipped branch is flat in theta, so its token gradient is zero.
      if (unclipped <= clipped) {
        result.dloss_dlogprob[i][t] = -inv_group * inv_length * unclipped;
      }
    }
    total += inner * inv_length;
  }
  result.loss = -total * inv_group;
  return result;
}

PolicyGradient::PolicyGradient(const PolicyParams& like) {
  for (int j = 0; j < kNumSteps; ++j) {
    heads[j].weights.assign(like.heads[j].weights.size(), 0.0);
    heads[j].bias.assign(like.heads[j].bias.size(), 0.0);
  }
}

namespace {

void accumulate_token_gradient(PolicyGradient& grad, const TokenGradient& token,
                               double scale) {
  StepHead& head = grad.heads[token.step_index];
  for (std::size_t c = 0; c < token.dweights.size(); ++c) {
    head.weights[c] += scale * token.dweights[c];
  }
  for (std::size_t c = 0; c < token.dbias.size(); ++c) {
    head.bias[c] += scale * token.dbias[c];
  }
}

// beta * KL gradient for every decoding context of a rollout; scale already
// carries beta / (group * length * batch).
void accumulate_kl_gradient(PolicyGradient& grad, const PolicyParams& params,
                            const PolicyParams& ref, const Instance& instance,
                            const Rollout& rollout, double scale) {
  std::size_t ctx_dim = static_cast<std::size_t>(params.context_dim());
  std::vector<double> context(ctx_dim);
  std::vector<double> dlogits;
  int prev_token = -1;
  std::size_t t = 0;
  for (int j = 0; j < kNumSteps; ++j) {
    const StepSpec& step = params.layout.steps[j];
    dlogits.resize(static_cast<std::size_t>(step.vocab));
    for (int p = 0; p < step.length; ++p, ++t) {
      build_context(params, instance.features, j, p, prev_token, context);
      exact_kl_with_grad(params, ref, j, context, dlogits);
      StepHead& head = grad.heads[j];
      for (int v = 0; v < step.vocab; ++v) {
        double coeff = scale * dlogits[static_cast<std::size_t>(v)];
        head.bias[static_cast<std::size_t>(v)] += coeff;
        double* row =
            head.weights.data() + static_cast<std::size_t>(v) * ctx_dim;
        for (std::size_t c = 0; c < ctx_dim; ++c) row[c] += coeff * context[c];
      }
      prev_token = rollout.tokens[t];
    }
  }
}

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, const PolicyParams& like)
      : kind_(kind), learning_rate_(learning_rate) {
    if (kind_ == OptimizerKind::kAdam) {
      m_ = std::make_unique<PolicyGradient>(like);
      v_ = std::make_unique<PolicyGradient>(like);
    }
  }

  void step(PolicyParams& params, const PolicyGradient& grad) {
    ++t_;
    for (int j = 0; j < kNumSteps; ++j) {
      apply(params.heads[j].weights, grad.heads[j].weights,
            m_ ? &m_->heads[j].weights : nullptr,
            v_ ? &v_->heads[j].weights : nullptr);
      apply(params.heads[j].bias, grad.heads[j].bias,
            m_ ? &m_->heads[j].bias : nullptr, v_ ? &v_->heads[j].bias : nullptr);
    }
  }

 private:
  void apply(std::vector<double>& w, const std::vector<double>& g,
             std::vector<double>* m, std::vector<double>* v) {
    if (kind_ == OptimizerKind::kSgd) {
      for (std::size_t c = 0; c < w.size(); ++c) {
        w[c] -= learning_rate_ * g[c];
      }
      return;
    }
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t c = 0; c < w.size(); ++c) {
      (*m)[c] = kBeta1 * (*m)[c] + (1.0 - kBeta1) * g[c];
      (*v)[c] = kBeta2 * (*v)[c] + (1.0 - kBeta2) * g[c] * g[c];
      double mhat = (*m)[c] / bc1;
      double vhat = (*v)[c] / bc2;
      w[c] -= learning_rate_ * mhat / (std::sqrt(vhat) + kEps);
    }
  }

  OptimizerKind kind_;
  double learning_rate_;
  std::int64_t t_ = 0;
  std::unique_ptr<PolicyGradient> m_;
  std::unique_ptr<PolicyGradient> v_;
};

std::vector<std::size_t> pick_minibatch(const std::vector<std::size_t>& pool,
                                        int batch, Rng& rng) {
  std::vector<std::size_t> indices = pool;
  std::size_t take =
      std::min(static_cast<std::size_t>(batch), indices.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + rng.uniform_index(indices.size() - i);
    std::swap(indices[i], indices[j]);
  }
  indices.resize(take);
  return indices;
}

void add_scaled(PolicyGradient& into, const PolicyGradient& from,
                double scale) {
  for (int j = 0; j < kNumSteps; ++j) {
    for (std::size_t c = 0; c < into.heads[j].weights.size(); ++c) {
      into.heads[j].weights[c] += scale * from.heads[j].weights[c];
    }
    for (std::size_t c = 0; c < into.heads[j].bias.size(); ++c) {
      into.heads[j].bias[c] += scale * from.heads[j].bias[c];
    }
  }
}

}  // namespace

GroupAdvantages compute_group_advantages(
    Algo algo, std::span<const StepRewards> rewards,
    std::span<const std::array<Span, kNumSteps>> spans,
    std::span<const std::size_t> token_counts, double discount,
    SrpoNormalization normalization, double advantage_epsilon) {
  if (rewards.size() != spans.size() || rewards.size() != token_counts.size()) {
    throw DataError("compute_group_advantages: group size mismatch");
  }
  GroupAdvantages result;
  std::vector<double> totals(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    totals[i] = algo == Algo::kGrpoSeq ? rewards[i].r[kNumSteps - 1]
                                       : rewards[i].total;
  }
  double mean = 0.0;
  for (double t : totals) mean += t;
  mean /= static_cast<double>(totals.size());
  double var = 0.0;
  for (double t : totals) var += (t - mean) * (t - mean);
  var /= static_cast<double>(totals.size());
  result.reward_mean = mean;
  result.reward_std = std::sqrt(var);
  result.sequence = grpo_advantages(totals, advantage_epsilon);

  if (algo == Algo::kSrpo) {
    result.per_token = srpo_group_advantages(rewards, spans, discount,
                                             normalization,
                                             advantage_epsilon);
  } else {
    result.per_token.resize(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      result.per_token[i].assign(token_counts[i], result.sequence[i]);
    }
  }
  return result;
}

GroupLossResult group_loss_and_gradient(
    const PolicyParams& params, const PolicyParams& reference,
    const Instance& instance, const std::vector<Rollout>& rollouts,
    const std::vector<std::vector<double>>& advantages, double ratio_clip,
    double kl_coefficient) {
  GroupLossResult result;
  result.gradient = PolicyGradient(params);

  std::vector<std::vector<double>> new_lp(rollouts.size());
  std::vector<std::vector<double>> old_lp(rollouts.size());
  std::vector<std::vector<double>> kls(rollouts.size());
  std::vector<LogprobResult> lp_results(rollouts.size());
  double kl_sum = 0.0;
  std::size_t kl_count = 0;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    lp_results[i] = logprob_and_grad(params, instance, rollouts[i]);
    new_lp[i] = lp_results[i].logprobs;
    old_lp[i] = rollouts[i].old_logprobs;
    kls[i] = rollout_kls(params, reference, instance, rollouts[i]);
    for (double k : kls[i]) kl_sum += k;
    kl_count += kls[i].size();
  }

  SurrogateResult surrogate = surrogate_loss(new_lp, old_lp, advantages,
                                             ratio_clip, kl_coefficient, kls);
  result.loss = surrogate.loss;
  result.mean_kl =
      kl_count > 0 ? kl_sum / static_cast<double>(kl_count) : 0.0;

  double group = static_cast<double>(rollouts.size());
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    for (std::size_t t = 0; t < lp_results[i].gradients.size(); ++t) {
      double scale = surrogate.dloss_dlogprob[i][t];
      if (scale != 0.0) {
        accumulate_token_gradient(result.gradient, lp_results[i].gradients[t],
                                  scale);
      }
    }
    if (kl_coefficient > 0.0) {
      double scale =
          kl_coefficient /
          (group * static_cast<double>(rollouts[i].tokens.size()));
      accumulate_kl_gradient(result.gradient, params, reference, instance,
                             rollouts[i], scale);
    }
  }
  return result;
}

TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const PolicyParams& init, const VerifierParams* verifier,
                  const RewardConfig& reward_config,
                  const TrainOptions& options) {
  config.validate();
  reward_config.validate();
  if (dataset.instances.empty()) {
    throw DataError("train: dataset is empty");
  }
  bool needs_verifier = false;
  for (RewardMode m : reward_config.mode) {
    if (m == RewardMode::kVerifier) needs_verifier = true;
  }
  if (needs_verifier && verifier == nullptr) {
    throw ConfigError("train: reward config requires a verifier checkpoint");
  }

  std::vector<std::size_t> pool = options.pool;
  if (pool.empty()) {
    pool.resize(dataset.instances.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  }

  PolicyParams params = init;
  PolicyParams reference = options.reference ? *options.reference : init;
  Optimizer optimizer(config.optimizer, config.learning_rate, params);

  int budget = options.budget >= 0 ? options.budget : config.iterations;
  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(budget));

  std::vector<double> reward_history;
  int group = config.group_size;

  for (int it = 0; it < budget; ++it) {
    int global_iter = options.iteration_offset + it;
    PolicyParams old_params = params;  // refreshed every rollout batch

    Rng batch_rng(derive_seed(config.seed, 0x626174ULL,
                              static_cast<std::uint64_t>(global_iter)));
    std::vector<std::size_t> minibatch =
        pick_minibatch(pool, config.rollout_batch, batch_rng);
    if (minibatch.empty()) {
      throw CurriculumExhausted("train: selection left no instances at stage '" +
                                options.stage_name + "'");
    }

    PolicyGradient grad(params);
    IterationRecord record;
    record.iteration = global_iter;
    record.stage = options.stage_name;
    record.pass_histogram.assign(static_cast<std::size_t>(group) + 1, 0);

    double loss_sum = 0.0;
    double kl_sum = 0.0;
    std::size_t kl_count = 0;
    double reward_sum = 0.0;
    std::array<double, kNumSteps> step_correct{};
    double inv_batch = 1.0 / static_cast<double>(minibatch.size());

    for (std::size_t instance_index : minibatch) {
      const Instance& instance = dataset.instances[instance_index];
      std::uint64_t rollout_seed =
          derive_seed(config.seed, 0x726f6cULL,
                      static_cast<std::uint64_t>(global_iter), instance.id);
      std::vector<Rollout> rollouts =
          sample_group(old_params, instance, group, config.temperature,
                       config.top_k, rollout_seed);

      std::vector<StepRewards> rewards(rollouts.size());
      std::vector<std::array<Span, kNumSteps>> spans(rollouts.size());
      int pass_count = 0;
      for (std::size_t i = 0; i < rollouts.size(); ++i) {
        rewards[i] =
            hybrid_step_rewards(rollouts[i], instance, verifier, reward_config);
        spans[i] = rollouts[i].step_spans;
        reward_sum += rewards[i].total;
        for (int s = 1; s <= kNumSteps; ++s) {
          if (parse_step(rollouts[i], s) == step_ground_truth(instance, s)) {
            step_correct[s - 1] += 1.0;
          }
        }
        if (parse_step(rollouts[i], kNumSteps) == instance.gt_grade) {
          ++pass_count;
        }
      }
      ++record.pass_histogram[static_cast<std::size_t>(pass_count)];

      std::vector<std::size_t> token_counts(rollouts.size());
      for (std::size_t i = 0; i < rollouts.size(); ++i) {
        token_counts[i] = rollouts[i].tokens.size();
      }
      std::vector<std::vector<double>> advantages =
          compute_group_advantages(config.algo, rewards, spans, token_counts,
                                   config.discount, config.srpo_normalization,
                                   config.advantage_epsilon)
              .per_token;
      if (config.batch_whitening) {
        double mean = 0.0;
        std::size_t count = 0;
        for (const auto& a : advantages) {
          for (double v : a) {
            mean += v;
            ++count;
          }
        }
        mean /= static_cast<double>(count);
        double var = 0.0;
        for (const auto& a : advantages) {
          for (double v : a) var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(count);
        double denom = std::sqrt(var) + config.advantage_epsilon;
        for (auto& a : advantages) {
          for (double& v : a) v = (v - mean) / denom;
        }
      }
      for (auto& a : advantages) {
        a = clip_advantages(std::move(a), config.advantage_clip);
      }

      GroupLossResult group_result =
          group_loss_and_gradient(params, reference, instance, rollouts,
                                  advantages, config.ratio_clip,
                                  config.kl_coefficient);
      loss_sum += group_result.loss;
      kl_sum += group_result.mean_kl;
      ++kl_count;
      add_scaled(grad, group_result.gradient, inv_batch);
    }

    optimizer.step(params, grad);

    double total_rollouts =
        static_cast<double>(minibatch.size()) * static_cast<double>(group);
    record.mean_total_reward = reward_sum / total_rollouts;
    record.loss = loss_sum * inv_batch;
    record.mean_kl = kl_count > 0 ? kl_sum / static_cast<double>(kl_count) : 0.0;
    for (int s = 0; s < kNumSteps; ++s) {
      record.step_accuracy[s] = step_correct[s] / total_rollouts;
    }
    result.trace.push_back(std::move(record));

    // Moving-average plateau check on the mean total reward.
    if (config.convergence.window > 0) {
      reward_history.push_back(result.trace.back().mean_total_reward);
      std::size_t w = static_cast<std::size_t>(config.convergence.window);
      if (reward_history.size() >= 2 * w) {
        double recent = 0.0;
        double previous = 0.0;
        for (std::size_t i = 0; i < w; ++i) {
          recent += reward_history[reward_history.size() - 1 - i];
          previous += reward_history[reward_history.size() - 1 - w - i];
        }
        if (std::abs(recent - previous) / static_cast<double>(w) <
            config.convergence.tolerance) {
          break;
        }
      }
    }
  }

  result.params = std::move(params);
  return result;
}

EvalRecord evaluate(const PolicyParams& params, const Dataset& dataset) {
  EvalRecord record;
  record.count = dataset.instances.size();
  if (dataset.instances.empty()) {
    return record;
  }
  ConfusionMatrix cm;
  std::array<double, kNumSteps> correct{};
  for (const Instance& instance : dataset.instances) {
    Rollout rollout = greedy_rollout(params, instance);
    for (int s = 1; s <= kNumSteps; ++s) {
      if (parse_step(rollout, s) == step_ground_truth(instance, s)) {
        correct[s - 1] += 1.0;
      }
    }
    cm.add(instance.gt_grade, parse_step(rollout, kNumSteps));
  }
  record.class_f1 = per_class_f1(cm);
  record.good_f1 = good_f1(cm);
  auto [macro, accuracy] = macro_f1_and_accuracy(cm);
  record.macro_f1 = macro;
  record.accuracy = accuracy;
  for (int s = 0; s < kNumSteps; ++s) {
    record.step_accuracy[s] =
        correct[s] / static_cast<double>(dataset.instances.size());
  }
  return record;
}

Algo algo_from_string(const std::string& name) {
  if (name == "grpo_seq") return Algo::kGrpoSeq;
  if (name == "grpo_stepsum") return Algo::kGrpoStepSum;
  if (name == "srpo") return Algo::kSrpo;
  throw ConfigError("train: unknown algo '" + name + "'");
}

std::string to_string(Algo algo) {
  switch (algo) {
    case Algo::kGrpoSeq:
      return "grpo_seq";
    case Algo::kGrpoStepSum:
      return "grpo_stepsum";
    default:
      return "srpo";
  }
}

}  // namespace srl
