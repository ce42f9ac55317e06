#include "srl/policy.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "srl/rng.hpp"
#include "srl/textio.hpp"

namespace srl {

int StepLayout::max_vocab() const {
  int v = 0;
  for (const StepSpec& s : steps) v = std::max(v, s.vocab);
  return v;
}

int StepLayout::total_tokens() const {
  int n = 0;
  for (const StepSpec& s : steps) n += s.length;
  return n;
}

std::array<Span, kNumSteps> StepLayout::spans() const {
  std::array<Span, kNumSteps> spans;
  std::size_t at = 0;
  for (int j = 0; j < kNumSteps; ++j) {
    spans[j] = {at, at + static_cast<std::size_t>(steps[j].length)};
    at = spans[j].end;
  }
  return spans;
}

void validate(const StepLayout& layout) {
  for (int j = 0; j < kNumSteps; ++j) {
    const StepSpec& s = layout.steps[j];
    if (s.id != j + 1) {
      throw ConfigError("step layout must cover steps 1..5 in order");
    }
    if (s.length < 1 || s.vocab < 1) {
      throw ConfigError("step layout: lengths and vocabularies must be >= 1");
    }
  }
}

StepLayout make_step_layout(const GeneratorSpec& spec,
                            const std::array<int, kNumSteps>& lengths) {
  StepLayout layout;
  std::array<int, kNumSteps> vocab = {spec.query_classes, spec.item_classes, 2,
                                      2, kNumGrades};
  for (int j = 0; j < kNumSteps; ++j) {
    layout.steps[j] = {j + 1, lengths[j], vocab[j]};
  }
  validate(layout);
  return layout;
}

std::size_t PolicyParams::parameter_count() const {
  std::size_t n = 0;
  for (const StepHead& h : heads) n += h.weights.size() + h.bias.size();
  return n;
}

PolicyParams PolicyParams::zeros(const StepLayout& layout, int feature_dim) {
  validate(layout);
  PolicyParams p;
  p.layout = layout;
  p.feature_dim = feature_dim;
  int ctx = p.context_dim();
  for (int j = 0; j < kNumSteps; ++j) {
    int v = layout.steps[j].vocab;
    p.heads[j].weights.assign(static_cast<std::size_t>(v) * ctx, 0.0);
    p.heads[j].bias.assign(static_cast<std::size_t>(v), 0.0);
  }
  return p;
}

PolicyParams PolicyParams::random_init(const StepLayout& layout,
                                       int feature_dim, double scale,
                                       std::uint64_t seed) {
  PolicyParams p = zeros(layout, feature_dim);
  if (scale != 0.0) {
    Rng rng(derive_seed(seed, 0x706f6cULL));
    for (StepHead& h : p.heads) {
      for (double& w : h.weights) w = scale * rng.normal();
      for (double& b : h.bias) b = scale * rng.normal();
    }
  }
  return p;
}

void build_context(const PolicyParams& params,
                   std::span<const double> features, int step_index,
                   int pos_in_step, int prev_token, std::span<double> context) {
  std::size_t d = static_cast<std::size_t>(params.feature_dim);
  if (features.size() != d) {
    throw DataError("build_context: feature dimension mismatch");
  }
  std::fill(context.begin(), context.end(), 0.0);
  std::copy(features.begin(), features.end(), context.begin());
  int vmax = params.layout.max_vocab();
  if (prev_token >= 0) {
    if (prev_token >= vmax) {
      throw DataError("build_context: previous token out of vocabulary");
    }
    context[d + static_cast<std::size_t>(prev_token)] = 1.0;
  }
  context[d + static_cast<std::size_t>(vmax) +
          static_cast<std::size_t>(step_index)] = 1.0;
  int length = params.layout.steps[step_index].length;
  context[context.size() - 1] =
      static_cast<double>(pos_in_step) / static_cast<double>(length);
}

void step_logits(const PolicyParams& params, int step_index,
                 std::span<const double> context, std::span<double> logits) {
  const StepHead& head = params.heads[step_index];
  std::size_t ctx = context.size();
  int vocab = params.layout.steps[step_index].vocab;
  for (int v = 0; v < vocab; ++v) {
    const double* row = head.weights.data() + static_cast<std::size_t>(v) * ctx;
    double z = head.bias[static_cast<std::size_t>(v)];
    for (std::size_t c = 0; c < ctx; ++c) z += row[c] * context[c];
    logits[static_cast<std::size_t>(v)] = z;
  }
}

void log_softmax_inplace(std::span<double> values) {
  double max = -std::numeric_limits<double>::infinity();
  for (double v : values) max = std::max(max, v);
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max);
  double lse = max + std::log(sum);
  for (double& v : values) v -= lse;
}

namespace {

// Shared sequential decode. `pick` chooses a token given the step index and
// that position's true log-probabilities.
template <typename PickFn>
Rollout decode_rollout(const PolicyParams& params, const Instance& instance,
                       PickFn&& pick) {
  Rollout rollout;
  rollout.instance_id = instance.id;
  rollout.step_spans = params.layout.spans();
  rollout.tokens.reserve(static_cast<std::size_t>(params.layout.total_tokens()));
  rollout.old_logprobs.reserve(rollout.tokens.capacity());

  std::vector<double> context(static_cast<std::size_t>(params.context_dim()));
  std::vector<double> logprobs;
  int prev_token = -1;
  for (int j = 0; j < kNumSteps; ++j) {
    const StepSpec& step = params.layout.steps[j];
    logprobs.resize(static_cast<std::size_t>(step.vocab));
    for (int p = 0; p < step.length; ++p) {
      build_context(params, instance.features, j, p, prev_token, context);
      step_logits(params, j, context, logprobs);
      log_softmax_inplace(logprobs);
      int token = pick(j, std::span<const double>(logprobs));
      rollout.tokens.push_back(token);
      rollout.old_logprobs.push_back(logprobs[static_cast<std::size_t>(token)]);
      prev_token = token;
    }
  }
  for (int j = 0; j < kNumSteps; ++j) {
    std::size_t last = rollout.step_spans[j].end - 1;
    rollout.parsed_outputs[j] = rollout.tokens[last];
  }
  return rollout;
}

}  // namespace

std::vector<Rollout> sample_group(const PolicyParams& params,
                                  const Instance& instance, int group_size,
                                  double temperature, int top_k,
                                  std::uint64_t rng_seed) {
  if (group_size < 2) {
    throw ConfigError("sample_group: group size must be >= 2");
  }
  if (!(temperature > 0.0)) {
    throw ConfigError("sample_group: temperature must be > 0");
  }
  if (top_k < 1) {
    throw ConfigError("sample_group: top_k must be >= 1");
  }

  std::vector<Rollout> group;
  group.reserve(static_cast<std::size_t>(group_size));
  for (int i = 0; i < group_size; ++i) {
    Rng rng(derive_seed(rng_seed, instance.id,
                        static_cast<std::uint64_t>(i), 0x726f6cULL));
    group.push_back(decode_rollout(
        params, instance,
        [&](int step_index, std::span<const double> logprobs) {
          int vocab = params.layout.steps[step_index].vocab;
          // Tempered proposal restricted to the top-k symbols; ties keep the
          // lower symbol first so the cut is deterministic.
          std::vector<int> order(static_cast<std::size_t>(vocab));
          std::iota(order.begin(), order.end(), 0);
          std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return logprobs[static_cast<std::size_t>(a)] >
                   logprobs[static_cast<std::size_t>(b)];
          });
          int keep = std::min(top_k, vocab);
          std::vector<double> weights(static_cast<std::size_t>(keep));
          double max_lp = logprobs[static_cast<std::size_t>(order[0])];
          for (int r = 0; r < keep; ++r) {
            weights[static_cast<std::size_t>(r)] = std::exp(
                (logprobs[static_cast<std::size_t>(order[r])] - max_lp) /
                temperature);
          }
          int pick = rng.categorical(weights);
          return order[static_cast<std::size_t>(pick)];
        }));
  }
  return group;
}

Rollout greedy_rollout(const PolicyParams& params, const Instance& instance) {
  return decode_rollout(params, instance,
                        [](int, std::span<const double> logprobs) {
                          int best = 0;
                          for (std::size_t v = 1; v < logprobs.size(); ++v) {
                            if (logprobs[v] > logprobs[static_cast<std::size_t>(best)]) {
                              best = static_cast<int>(v);
                            }
                          }
                          return best;
                        });
}

LogprobResult logprob_and_grad(const PolicyParams& params,
                               const Instance& instance, const Rollout& rollout,
                               bool with_gradients) {
  LogprobResult result;
  result.logprobs.reserve(rollout.tokens.size());

  std::size_t ctx_dim = static_cast<std::size_t>(params.context_dim());
  std::vector<double> context(ctx_dim);
  std::vector<double> logprobs;
  int prev_token = -1;
  std::size_t t = 0;
  for (int j = 0; j < kNumSteps; ++j) {
    const StepSpec& step = params.layout.steps[j];
    logprobs.resize(static_cast<std::size_t>(step.vocab));
    for (int p = 0; p < step.length; ++p, ++t) {
      if (t >= rollout.tokens.size()) {
        throw DataError("logprob_and_grad: rollout shorter than layout");
      }
      int token = rollout.tokens[t];
      if (token < 0 || token >= step.vocab) {
        throw DataError("logprob_and_grad: token " + std::to_string(token) +
                        " outside vocabulary of step " + std::to_string(j + 1));
      }
      build_context(params, instance.features, j, p, prev_token, context);
      step_logits(params, j, context, logprobs);
      log_softmax_inplace(logprobs);
      result.logprobs.push_back(logprobs[static_cast<std::size_t>(token)]);

      if (with_gradients) {
        TokenGradient grad;
        grad.step_index = j;
        grad.dbias.resize(static_cast<std::size_t>(step.vocab));
        grad.dweights.resize(static_cast<std::size_t>(step.vocab) * ctx_dim);
        for (int v = 0; v < step.vocab; ++v) {
          double coeff = ((v == token) ? 1.0 : 0.0) -
                         std::exp(logprobs[static_cast<std::size_t>(v)]);
          grad.dbias[static_cast<std::size_t>(v)] = coeff;
          double* row =
              grad.dweights.data() + static_cast<std::size_t>(v) * ctx_dim;
          for (std::size_t c = 0; c < ctx_dim; ++c) row[c] = coeff * context[c];
        }
        result.gradients.push_back(std::move(grad));
      }
      prev_token = token;
    }
  }
  if (t != rollout.tokens.size()) {
    throw DataError("logprob_and_grad: rollout longer than layout");
  }
  return result;
}

namespace {

void check_same_layout(const PolicyParams& a, const PolicyParams& b) {
  if (!(a.layout == b.layout) || a.feature_dim != b.feature_dim) {
    throw ConfigError("exact_kl: parameter sets have different layouts");
  }
}

}  // namespace

double exact_kl(const PolicyParams& params, const PolicyParams& ref,
                int step_index, std::span<const double> context) {
  check_same_layout(params, ref);
  int vocab = params.layout.steps[step_index].vocab;
  std::vector<double> lp(static_cast<std::size_t>(vocab));
  std::vector<double> lq(static_cast<std::size_t>(vocab));
  step_logits(params, step_index, context, lp);
  step_logits(ref, step_index, context, lq);
  log_softmax_inplace(lp);
  log_softmax_inplace(lq);
  double kl = 0.0;
  for (int v = 0; v < vocab; ++v) {
    std::size_t u = static_cast<std::size_t>(v);
    kl += std::exp(lp[u]) * (lp[u] - lq[u]);
  }
  return std::max(kl, 0.0);
}

double exact_kl_with_grad(const PolicyParams& params, const PolicyParams& ref,
                          int step_index, std::span<const double> context,
                          std::span<double> dlogits) {
  check_same_layout(params, ref);
  int vocab = params.layout.steps[step_index].vocab;
  std::vector<double> lp(static_cast<std::size_t>(vocab));
  std::vector<double> lq(static_cast<std::size_t>(vocab));
  step_logits(params, step_index, context, lp);
  step_logits(ref, step_index, context, lq);
  log_softmax_inplace(lp);
  log_softmax_inplace(lq);
  double kl = 0.0;
  for (int v = 0; v < vocab; ++v) {
    std::size_t u = static_cast<std::size_t>(v);
    kl += std::exp(lp[u]) * (lp[u] - lq[u]);
  }
  // d KL / d z_u = p_u * ((log p - log q)_u - KL)
  for (int v = 0; v < vocab; ++v) {
    std::size_t u = static_cast<std::size_t>(v);
    dlogits[u] = std::exp(lp[u]) * ((lp[u] - lq[u]) - kl);
  }
  return std::max(kl, 0.0);
}

std::vector<double> rollout_kls(const PolicyParams& params,
                                const PolicyParams& ref,
                                const Instance& instance,
                                const Rollout& rollout) {
  std::vector<double> kls;
  kls.reserve(rollout.tokens.size());
  std::vector<double> context(static_cast<std::size_t>(params.context_dim()));
  int prev_token = -1;
  std::size_t t = 0;
  for (int j = 0; j < kNumSteps; ++j) {
    const StepSpec& step = params.layout.steps[j];
    for (int p = 0; p < step.length; ++p, ++t) {
      build_context(params, instance.features, j, p, prev_token, context);
      kls.push_back(exact_kl(params, ref, j, context));
      prev_token = rollout.tokens[t];
    }
  }
  return kls;
}

void save_policy(const PolicyParams& params, const std::string& path,
                 const std::string& config_hash, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["record"] = "policy_checkpoint";
  j["format_version"] = 1;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["feature_dim"] = params.feature_dim;
  nlohmann::ordered_json layout = nlohmann::ordered_json::array();
  for (const StepSpec& s : params.layout.steps) {
    layout.push_back({{"id", s.id}, {"length", s.length}, {"vocab", s.vocab}});
  }
  j["step_layout"] = layout;
  nlohmann::ordered_json heads = nlohmann::ordered_json::array();
  for (const StepHead& h : params.heads) {
    heads.push_back({{"weights", h.weights}, {"bias", h.bias}});
  }
  j["heads"] = heads;
  write_file(path, j.dump() + "\n");
}

PolicyParams load_policy(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || j.value("record", "") != "policy_checkpoint") {
    throw DataError("not a policy checkpoint: " + path);
  }
  PolicyParams params;
  params.feature_dim = j.at("feature_dim").get<int>();
  const auto& layout = j.at("step_layout");
  if (layout.size() != kNumSteps) {
    throw DataError("policy checkpoint: bad step layout: " + path);
  }
  for (int s = 0; s < kNumSteps; ++s) {
    params.layout.steps[s].id = layout[s].at("id").get<int>();
    params.layout.steps[s].length = layout[s].at("length").get<int>();
    params.layout.steps[s].vocab = layout[s].at("vocab").get<int>();
  }
  validate(params.layout);
  const auto& heads = j.at("heads");
  for (int s = 0; s < kNumSteps; ++s) {
    params.heads[s].weights = heads[s].at("weights").get<std::vector<double>>();
    params.heads[s].bias = heads[s].at("bias").get<std::vector<double>>();
  }
  return params;
}

}  // namespace srl
