#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "srl/optim.hpp"
#include "srl/rng.hpp"
#include "test_support.hpp"

using namespace srl;

namespace {

RewardConfig oracle_reward_config() {
  RewardConfig cfg;
  cfg.mode = {RewardMode::kGroundTruth, RewardMode::kGroundTruth,
              RewardMode::kGroundTruth, RewardMode::kGroundTruth,
              RewardMode::kGroundTruth};
  return cfg;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.group_size = 4;
  cfg.rollout_batch = 3;
  cfg.iterations = 5;
  cfg.learning_rate = 0.3;
  cfg.seed = 11;
  return cfg;
}

void perturb(PolicyParams& params, double scale, std::uint64_t seed) {
  Rng rng(seed);
  for (StepHead& head : params.heads) {
    for (double& w : head.weights) w += scale * rng.normal();
    for (double& b : head.bias) b += scale * rng.normal();
  }
}

double loss_at(const PolicyParams& params, const PolicyParams& ref,
               const Instance& inst, const std::vector<Rollout>& rollouts,
               const std::vector<std::vector<double>>& advantages, double eps,
               double beta) {
  return group_loss_and_gradient(params, ref, inst, rollouts, advantages, eps,
                                 beta)
      .loss;
}

}  // namespace

TEST_CASE("surrogate at rho=1 with beta=0 is minus the mean advantage") {
  std::vector<std::vector<double>> lp = {{-0.5, -1.0}, {-0.2, -0.3, -0.4}};
  std::vector<std::vector<double>> adv = {{1.0, 3.0}, {0.5, 0.5, -1.0}};
  std::vector<std::vector<double>> kl = {{0.0, 0.0}, {0.0, 0.0, 0.0}};
  SurrogateResult result = surrogate_loss(lp, lp, adv, 0.2, 0.0, kl);
  double expect = -0.5 * ((1.0 + 3.0) / 2.0 + (0.5 + 0.5 - 1.0) / 3.0);
  CHECK(result.loss == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("deep in the clipped region the token gradient vanishes") {
  double eps = 0.2;
  // rho = exp(new - old) = 1 + 2*eps.
  double old_lp = -1.0;
  double new_lp = old_lp + std::log(1.0 + 2.0 * eps);
  std::vector<std::vector<double>> nlp = {{new_lp, new_lp}};
  std::vector<std::vector<double>> olp = {{old_lp, old_lp}};
  std::vector<std::vector<double>> adv = {{1.5, 1.5}};
  std::vector<std::vector<double>> kl = {{0.0, 0.0}};
  SurrogateResult result = surrogate_loss(nlp, olp, adv, eps, 0.0, kl);
  // min picks (1+eps)*A.
  CHECK(result.loss == doctest::Approx(-(1.0 + eps) * 1.5).epsilon(1e-12));
  CHECK(result.dloss_dlogprob[0][0] == 0.0);
  CHECK(result.dloss_dlogprob[0][1] == 0.0);
}

TEST_CASE("zero KL contributes nothing even with beta set") {
  std::vector<std::vector<double>> lp = {{-0.7, -0.7}};
  std::vector<std::vector<double>> adv = {{1.0, 1.0}};
  std::vector<std::vector<double>> kl = {{0.0, 0.0}};
  SurrogateResult with_beta = surrogate_loss(lp, lp, adv, 0.2, 0.1, kl);
  SurrogateResult without = surrogate_loss(lp, lp, adv, 0.2, 0.0, kl);
  CHECK(with_beta.loss == without.loss);
}

TEST_CASE("token-constant advantages reproduce the sequence-level loss") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t group = 2 + rng.uniform_index(6);
    std::vector<std::vector<double>> nlp(group);
    std::vector<std::vector<double>> olp(group);
    std::vector<std::vector<double>> adv(group);
    std::vector<std::vector<double>> kl(group);
    std::vector<double> sequence_adv(group);
    double eps = 0.2;
    double beta = trial % 2 == 0 ? 0.0 : 0.05;
    for (std::size_t i = 0; i < group; ++i) {
      std::size_t length = 1 + rng.uniform_index(7);
      sequence_adv[i] = rng.normal();
      for (std::size_t t = 0; t < length; ++t) {
        double old_lp = -2.0 * rng.uniform() - 0.05;
        nlp[i].push_back(old_lp + 0.3 * rng.normal());
        olp[i].push_back(old_lp);
        adv[i].push_back(sequence_adv[i]);
        kl[i].push_back(rng.uniform() * 0.01);
      }
    }
    double token_level = surrogate_loss(nlp, olp, adv, eps, beta, kl).loss;

    // Sequence-level oracle written from the grouped clipped-surrogate
    // definition with a static per-rollout advantage.
    double total = 0.0;
    for (std::size_t i = 0; i < group; ++i) {
      double inner = 0.0;
      for (std::size_t t = 0; t < nlp[i].size(); ++t) {
        double rho = std::exp(nlp[i][t] - olp[i][t]);
        double unclipped = rho * sequence_adv[i];
        double clipped =
            std::clamp(rho, 1.0 - eps, 1.0 + eps) * sequence_adv[i];
        inner += std::min(unclipped, clipped) - beta * kl[i][t];
      }
      total += inner * (1.0 / static_cast<double>(nlp[i].size()));
    }
    double sequence_level = -total * (1.0 / static_cast<double>(group));
    CHECK(token_level == sequence_level);
  }
}

TEST_CASE("length mismatch is a data error") {
  std::vector<std::vector<double>> nlp = {{-0.5, -1.0}};
  std::vector<std::vector<double>> olp = {{-0.5}};
  std::vector<std::vector<double>> adv = {{1.0, 1.0}};
  std::vector<std::vector<double>> kl = {{0.0, 0.0}};
  CHECK_THROWS_AS(surrogate_loss(nlp, olp, adv, 0.2, 0.0, kl), DataError);
}

TEST_CASE("group loss gradient matches finite differences") {
  const double h = 1e-5;
  Rng rng(123);
  int checked = 0;
  for (int trial = 0; trial < 24; ++trial) {
    GeneratorSpec spec;
    spec.n = 1;
    spec.seed = 100 + static_cast<std::uint64_t>(trial);
    spec.feature_dim = 13;
    spec.query_classes = 2;
    spec.item_classes = 3;
    spec.noise.attribute_width = 2;
    Dataset dataset = generate_dataset(spec);
    const Instance& inst = dataset.instances[0];

    StepLayout layout = make_step_layout(spec, {1, 2, 1, 1, 1});
    PolicyParams sampling =
        PolicyParams::random_init(layout, spec.feature_dim, 0.4, rng.next_u64());
    std::vector<Rollout> rollouts =
        sample_group(sampling, inst, 3, 1.0, 100, rng.next_u64());

    // Evaluate slightly off the sampling parameters; the perturbation is
    // small enough to stay inside the clip band (unclipped regime).
    PolicyParams params = sampling;
    perturb(params, 1e-3, rng.next_u64());
    PolicyParams ref =
        PolicyParams::random_init(layout, spec.feature_dim, 0.3, rng.next_u64());
    double beta = trial % 3 == 0 ? 0.1 : 0.0;

    std::vector<std::vector<double>> advantages(rollouts.size());
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      advantages[i].resize(rollouts[i].tokens.size());
      for (double& a : advantages[i]) a = 1.5 * rng.normal();
    }

    GroupLossResult result = group_loss_and_gradient(
        params, ref, inst, rollouts, advantages, 0.2, beta);

    double num = 0.0;
    double den = 0.0;
    for (int j = 0; j < kNumSteps; ++j) {
      for (std::size_t c = 0; c < params.heads[j].weights.size(); ++c) {
        PolicyParams plus = params;
        PolicyParams minus = params;
        plus.heads[j].weights[c] += h;
        minus.heads[j].weights[c] -= h;
        double fd = (loss_at(plus, ref, inst, rollouts, advantages, 0.2, beta) -
                     loss_at(minus, ref, inst, rollouts, advantages, 0.2, beta)) /
                    (2.0 * h);
        double diff = fd - result.gradient.heads[j].weights[c];
        num += diff * diff;
        den += fd * fd;
      }
      for (std::size_t c = 0; c < params.heads[j].bias.size(); ++c) {
        PolicyParams plus = params;
        PolicyParams minus = params;
        plus.heads[j].bias[c] += h;
        minus.heads[j].bias[c] -= h;
        double fd = (loss_at(plus, ref, inst, rollouts, advantages, 0.2, beta) -
                     loss_at(minus, ref, inst, rollouts, advantages, 0.2, beta)) /
                    (2.0 * h);
        double diff = fd - result.gradient.heads[j].bias[c];
        num += diff * diff;
        den += fd * fd;
      }
    }
    CHECK(std::sqrt(num) <= 1e-6 * std::max(1.0, std::sqrt(den)));
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("a small step along the gradient does not increase the loss") {
  Rng rng(321);
  int non_increasing = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    GeneratorSpec spec;
    spec.n = 1;
    spec.seed = 300 + static_cast<std::uint64_t>(trial);
    Dataset dataset = generate_dataset(spec);
    const Instance& inst = dataset.instances[0];
    StepLayout layout = make_step_layout(spec, {1, 1, 1, 1, 1});
    PolicyParams params =
        PolicyParams::random_init(layout, spec.feature_dim, 0.5, rng.next_u64());
    std::vector<Rollout> rollouts =
        sample_group(params, inst, 6, 1.0, 100, rng.next_u64());
    std::vector<std::vector<double>> advantages(rollouts.size());
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      advantages[i].assign(rollouts[i].tokens.size(), rng.normal());
    }
    GroupLossResult result = group_loss_and_gradient(
        params, params, inst, rollouts, advantages, 0.2, 0.0);
    PolicyParams stepped = params;
    const double lr = 1e-3;
    for (int j = 0; j < kNumSteps; ++j) {
      for (std::size_t c = 0; c < stepped.heads[j].weights.size(); ++c) {
        stepped.heads[j].weights[c] -= lr * result.gradient.heads[j].weights[c];
      }
      for (std::size_t c = 0; c < stepped.heads[j].bias.size(); ++c) {
        stepped.heads[j].bias[c] -= lr * result.gradient.heads[j].bias[c];
      }
    }
    double after = loss_at(stepped, params, inst, rollouts, advantages, 0.2, 0.0);
    if (after <= result.loss + 1e-12) ++non_increasing;
  }
  CHECK(non_increasing >= trials * 9 / 10);
}

TEST_CASE("training is deterministic") {
  Dataset dataset = generate_dataset(testing::noise_free_spec(24, 5));
  StepLayout layout = make_step_layout(dataset.spec, {1, 1, 1, 1, 1});
  PolicyParams init = PolicyParams::zeros(layout, dataset.spec.feature_dim);
  TrainConfig cfg = tiny_train_config();
  TrainResult a = train(cfg, dataset, init, nullptr, oracle_reward_config());
  TrainResult b = train(cfg, dataset, init, nullptr, oracle_reward_config());
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].mean_total_reward == b.trace[i].mean_total_reward);
    CHECK(a.trace[i].loss == b.trace[i].loss);
    CHECK(a.trace[i].pass_histogram == b.trace[i].pass_histogram);
  }
  for (int j = 0; j < kNumSteps; ++j) {
    CHECK(a.params.heads[j].weights == b.params.heads[j].weights);
  }
}

TEST_CASE("training improves the final grade on an easy task") {
  GeneratorSpec spec;
  spec.n = 120;
  spec.seed = 17;
  spec.noise.min_sigma = 0.02;
  spec.noise.max_sigma = 0.15;
  Dataset dataset = generate_dataset(spec);
  StepLayout layout = make_step_layout(spec, {1, 1, 1, 1, 1});
  PolicyParams init = PolicyParams::zeros(layout, spec.feature_dim);

  TrainConfig cfg;
  cfg.algo = Algo::kSrpo;
  cfg.group_size = 8;
  cfg.rollout_batch = 8;
  cfg.iterations = 120;
  cfg.learning_rate = 0.6;
  cfg.seed = 3;
  TrainResult result =
      train(cfg, dataset, init, nullptr, oracle_reward_config());

  EvalRecord before = evaluate(init, dataset);
  EvalRecord after = evaluate(result.params, dataset);
  CHECK(after.accuracy > before.accuracy);
  CHECK(after.step_accuracy[4] > before.step_accuracy[4]);
}

TEST_CASE("step-level credit converges intermediate steps; sequence-level "
          "credit does not") {
  GeneratorSpec spec;
  spec.n = 300;
  spec.seed = 23;
  spec.deceptive_fraction = 0.15;
  Dataset dataset = generate_dataset(spec);
  StepLayout layout = make_step_layout(spec, {1, 1, 1, 1, 1});
  PolicyParams init = PolicyParams::zeros(layout, spec.feature_dim);

  auto step34 = [](const IterationRecord& row) {
    return 0.5 * (row.step_accuracy[2] + row.step_accuracy[3]);
  };
  int srpo_faster = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    TrainConfig cfg;
    cfg.iterations = 120;
    cfg.seed = seed;
    cfg.algo = Algo::kSrpo;
    cfg.srpo_normalization = SrpoNormalization::kGroupPerStep;
    TrainResult srpo = train(cfg, dataset, init, nullptr,
                             oracle_reward_config());
    cfg.algo = Algo::kGrpoSeq;
    TrainResult grpo = train(cfg, dataset, init, nullptr,
                             oracle_reward_config());

    double target = 0.9 * step34(srpo.trace.back());
    auto first_reaching = [&](const TrainResult& r) {
      for (std::size_t i = 0; i < r.trace.size(); ++i) {
        if (step34(r.trace[i]) >= target) return static_cast<int>(i);
      }
      return static_cast<int>(r.trace.size());  // never reached
    };
    if (first_reaching(srpo) < first_reaching(grpo)) ++srpo_faster;
    CHECK(step34(srpo.trace.back()) > step34(grpo.trace.back()) + 0.2);
  }
  CHECK(srpo_faster == 3);
}

TEST_CASE("a huge KL coefficient pins the policy to the reference") {
  Dataset dataset = generate_dataset(testing::noise_free_spec(30, 9));
  StepLayout layout = make_step_layout(dataset.spec, {1, 1, 1, 1, 1});
  PolicyParams init = PolicyParams::zeros(layout, dataset.spec.feature_dim);
  TrainConfig cfg = tiny_train_config();
  cfg.iterations = 80;
  cfg.kl_coefficient = 1e3;
  // Keep beta * lr in the stable regime; the anchor then dominates.
  cfg.learning_rate = 5e-5;
  TrainResult result =
      train(cfg, dataset, init, nullptr, oracle_reward_config());
  // Mean exact KL to the reference stays tiny.
  double total_kl = 0.0;
  int count = 0;
  for (const Instance& inst : dataset.instances) {
    Rollout rollout = greedy_rollout(result.params, inst);
    for (double kl : rollout_kls(result.params, init, inst, rollout)) {
      total_kl += kl;
      ++count;
    }
  }
  CHECK(total_kl / count < 1e-3);
}

TEST_CASE("plateau convergence stops early") {
  Dataset dataset = generate_dataset(testing::noise_free_spec(16, 2));
  // Saturated oracle policy: reward is constant, so the moving averages
  // coincide immediately.
  PolicyParams init = testing::oracle_policy(dataset.spec);
  TrainConfig cfg = tiny_train_config();
  cfg.iterations = 200;
  cfg.learning_rate = 1e-6;
  cfg.convergence.window = 5;
  cfg.convergence.tolerance = 1e-6;
  TrainResult result =
      train(cfg, dataset, init, nullptr, oracle_reward_config());
  CHECK(result.trace.size() == 10);
}

TEST_CASE("an empty dataset is a data error") {
  Dataset dataset = generate_dataset(testing::noise_free_spec(8, 3));
  StepLayout layout = make_step_layout(dataset.spec, {1, 1, 1, 1, 1});
  PolicyParams init = PolicyParams::zeros(layout, dataset.spec.feature_dim);
  TrainConfig cfg = tiny_train_config();
  Dataset empty;
  empty.spec = dataset.spec;
  CHECK_THROWS_AS(train(cfg, empty, init, nullptr, oracle_reward_config()),
                  DataError);
}

TEST_CASE("evaluate on the zero policy matches the label marginal") {
  GeneratorSpec spec;
  spec.n = 2000;
  spec.seed = 4;
  Dataset dataset = generate_dataset(spec);
  StepLayout layout = make_step_layout(spec, {1, 1, 1, 1, 1});
  PolicyParams zero = PolicyParams::zeros(layout, spec.feature_dim);
  EvalRecord record = evaluate(zero, dataset);
  // Greedy decoding of the uniform policy always predicts grade 1.
  double sigma = std::sqrt(0.25 * 0.75 / 2000.0);
  CHECK(std::abs(record.accuracy - 0.25) < 4.0 * sigma);
}

TEST_CASE("evaluate on the oracle policy is perfect") {
  Dataset dataset = generate_dataset(testing::noise_free_spec(400, 6));
  PolicyParams oracle = testing::oracle_policy(dataset.spec);
  EvalRecord record = evaluate(oracle, dataset);
  CHECK(record.accuracy == 1.0);
  CHECK(record.macro_f1 == 1.0);
  CHECK(record.good_f1 == 1.0);
  for (double acc : record.step_accuracy) CHECK(acc == 1.0);
}

TEST_CASE("evaluate on an empty dataset is the zero record") {
  Dataset empty;
  empty.spec = testing::noise_free_spec(4, 1);
  PolicyParams zero = PolicyParams::zeros(
      make_step_layout(empty.spec, {1, 1, 1, 1, 1}), empty.spec.feature_dim);
  EvalRecord record = evaluate(zero, empty);
  CHECK(record.count == 0);
  CHECK(record.accuracy == 0.0);
  CHECK(record.macro_f1 == 0.0);
}

TEST_CASE("group advantage assembly matches the estimators") {
  auto spans_of = [](std::initializer_list<std::size_t> lengths) {
    std::array<Span, kNumSteps> spans;
    std::size_t at = 0;
    int j = 0;
    for (std::size_t l : lengths) {
      spans[j] = {at, at + l};
      at = spans[j].end;
      ++j;
    }
    return spans;
  };
  auto spans = spans_of({1, 1, 1, 1, 2});
  std::vector<StepRewards> rewards(3);
  rewards[0].r = {0.2, 0.2, 0.2, 0.2, 1.0};
  rewards[1].r = {0.0, 0.2, 0.0, 0.2, 0.0};
  rewards[2].r = {0.2, 0.0, 0.2, 0.0, 1.0};
  for (auto& r : rewards) {
    r.total = 0.0;
    for (double v : r.r) r.total += v;
  }
  std::vector<std::array<Span, kNumSteps>> group_spans(3, spans);
  std::vector<std::size_t> tokens(3, 6);

  GroupAdvantages seq = compute_group_advantages(
      Algo::kGrpoSeq, rewards, group_spans, tokens, 1.0,
      SrpoNormalization::kRaw, 1e-4);
  std::vector<double> finals = {1.0, 0.0, 1.0};
  auto expect_seq = grpo_advantages(finals, 1e-4);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(seq.sequence[i] == expect_seq[i]);
    for (double a : seq.per_token[i]) CHECK(a == expect_seq[i]);
    CHECK(seq.per_token[i].size() == 6);
  }
  CHECK(seq.reward_mean == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  GroupAdvantages step = compute_group_advantages(
      Algo::kSrpo, rewards, group_spans, tokens, 1.0, SrpoNormalization::kRaw,
      1e-4);
  for (std::size_t i = 0; i < 3; ++i) {
    auto expect = srpo_token_advantages(rewards[i], spans, 1.0);
    CHECK(step.per_token[i] == expect);
  }
  // Sequence-level statistics are reported for the trace either way.
  auto totals_norm = grpo_advantages(std::vector<double>{1.8, 0.4, 1.4}, 1e-4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(step.sequence[i] == totals_norm[i]);
}

TEST_CASE("batch whitening recenters the advantages") {
  Dataset dataset = generate_dataset(testing::noise_free_spec(24, 13));
  PolicyParams init = PolicyParams::zeros(
      make_step_layout(dataset.spec, {1, 1, 1, 1, 1}), dataset.spec.feature_dim);
  TrainConfig cfg = tiny_train_config();
  cfg.batch_whitening = true;
  TrainResult a = train(cfg, dataset, init, nullptr, oracle_reward_config());
  TrainResult b = train(cfg, dataset, init, nullptr, oracle_reward_config());
  for (int j = 0; j < kNumSteps; ++j) {
    CHECK(a.params.heads[j].weights == b.params.heads[j].weights);
  }
  cfg.batch_whitening = false;
  TrainResult c = train(cfg, dataset, init, nullptr, oracle_reward_config());
  CHECK(a.params.heads[4].weights != c.params.heads[4].weights);
}

TEST_CASE("adam optimizer runs deterministically") {
  Dataset dataset = generate_dataset(testing::noise_free_spec(20, 8));
  StepLayout layout = make_step_layout(dataset.spec, {1, 1, 1, 1, 1});
  PolicyParams init = PolicyParams::zeros(layout, dataset.spec.feature_dim);
  TrainConfig cfg = tiny_train_config();
  cfg.optimizer = OptimizerKind::kAdam;
  cfg.learning_rate = 0.05;
  TrainResult a = train(cfg, dataset, init, nullptr, oracle_reward_config());
  TrainResult b = train(cfg, dataset, init, nullptr, oracle_reward_config());
  for (int j = 0; j < kNumSteps; ++j) {
    CHECK(a.params.heads[j].weights == b.params.heads[j].weights);
  }
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.group_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.ratio_clip = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.discount = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.kl_coefficient = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
