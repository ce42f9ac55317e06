#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "srl/reward.hpp"
#include "srl/rewardmodel.hpp"

using namespace srl;

namespace {

// Rollout whose span-final tokens encode the given per-step answers.
Rollout make_rollout(const StepLayout& layout,
                     const std::array<int, kNumSteps>& answer_tokens) {
  Rollout rollout;
  rollout.step_spans = layout.spans();
  rollout.tokens.assign(static_cast<std::size_t>(layout.total_tokens()), 0);
  rollout.old_logprobs.assign(rollout.tokens.size(), -0.5);
  for (int j = 0; j < kNumSteps; ++j) {
    rollout.tokens[rollout.step_spans[j].end - 1] = answer_tokens[j];
    rollout.parsed_outputs[j] = answer_tokens[j];
  }
  return rollout;
}

Instance make_instance() {
  Instance inst;
  inst.id = 3;
  inst.features = {0.1, -0.2, 0.3, 0.4};
  inst.gt_query_class = 2;
  inst.gt_item_class = 1;
  inst.gt_category_match = true;
  inst.gt_attribute_match = false;
  inst.gt_grade = 3;
  inst.tags.label = 3;
  return inst;
}

RewardConfig ground_truth_config() {
  RewardConfig cfg;
  cfg.mode = {RewardMode::kGroundTruth, RewardMode::kGroundTruth,
              RewardMode::kGroundTruth, RewardMode::kGroundTruth,
              RewardMode::kGroundTruth};
  return cfg;
}

StepLayout layout_4() {
  GeneratorSpec spec;
  return make_step_layout(spec, {1, 1, 1, 1, 1});
}

}  // namespace

TEST_CASE("parse_step decodes the answer spaces") {
  StepLayout layout = layout_4();
  Rollout rollout = make_rollout(layout, {2, 1, 1, 0, 2});
  CHECK(parse_step(rollout, 1) == 2);
  CHECK(parse_step(rollout, 2) == 1);
  CHECK(parse_step(rollout, 3) == 1);  // match
  CHECK(parse_step(rollout, 4) == 0);
  CHECK(parse_step(rollout, 5) == 3);  // token 2 -> grade 3
  // Parsing twice is identical.
  CHECK(parse_step(rollout, 5) == parse_step(rollout, 5));
}

TEST_CASE("parse_step uses the last token of a multi-token span") {
  GeneratorSpec spec;
  StepLayout layout = make_step_layout(spec, {2, 1, 3, 1, 2});
  Rollout rollout;
  rollout.step_spans = layout.spans();
  rollout.tokens = {1, 3, 2, 0, 1, 1, 0, 3, 2};
  rollout.old_logprobs.assign(rollout.tokens.size(), -0.1);
  CHECK(parse_step(rollout, 1) == 3);
  CHECK(parse_step(rollout, 3) == 1);
  CHECK(parse_step(rollout, 5) == 3);
}

TEST_CASE("ground-truth encodings") {
  Instance inst = make_instance();
  CHECK(step_ground_truth(inst, 1) == 2);
  CHECK(step_ground_truth(inst, 2) == 1);
  CHECK(step_ground_truth(inst, 3) == 1);
  CHECK(step_ground_truth(inst, 4) == 0);
  CHECK(step_ground_truth(inst, 5) == 3);
}

TEST_CASE("all-correct rollout earns the full coefficient sum") {
  StepLayout layout = layout_4();
  Instance inst = make_instance();
  Rollout rollout = make_rollout(layout, {2, 1, 1, 0, 2});
  StepRewards rewards =
      hybrid_step_rewards(rollout, inst, nullptr, ground_truth_config());
  CHECK(rewards.r[0] == 0.2);
  CHECK(rewards.r[4] == 1.0);
  CHECK(rewards.total == doctest::Approx(1.8).epsilon(1e-15));
}

TEST_CASE("all-wrong rollout earns zero") {
  StepLayout layout = layout_4();
  Instance inst = make_instance();
  Rollout rollout = make_rollout(layout, {0, 0, 0, 1, 0});
  StepRewards rewards =
      hybrid_step_rewards(rollout, inst, nullptr, ground_truth_config());
  for (double r : rewards.r) CHECK(r == 0.0);
  CHECK(rewards.total == 0.0);
}

TEST_CASE("flipping one step moves the total by exactly its coefficient") {
  StepLayout layout = layout_4();
  Instance inst = make_instance();
  RewardConfig cfg = ground_truth_config();
  Rollout correct = make_rollout(layout, {2, 1, 1, 0, 2});
  double base = hybrid_step_rewards(correct, inst, nullptr, cfg).total;
  for (int step = 1; step <= kNumSteps; ++step) {
    std::array<int, kNumSteps> answers = {2, 1, 1, 0, 2};
    answers[step - 1] = answers[step - 1] == 0 ? 1 : 0;
    Rollout flipped = make_rollout(layout, answers);
    double total = hybrid_step_rewards(flipped, inst, nullptr, cfg).total;
    CHECK(base - total ==
          doctest::Approx(cfg.step_coefficients[step - 1]).epsilon(1e-12));
  }
}

TEST_CASE("rewards live on the lattice {0, coefficient}") {
  StepLayout layout = layout_4();
  Instance inst = make_instance();
  RewardConfig cfg = ground_truth_config();
  for (int mask = 0; mask < 4; ++mask) {
    Rollout rollout = make_rollout(
        layout, {mask & 1 ? 2 : 0, mask & 2 ? 1 : 0, 1, 0, 2});
    StepRewards rewards = hybrid_step_rewards(rollout, inst, nullptr, cfg);
    for (int j = 0; j < 4; ++j) {
      CHECK((rewards.r[j] == 0.0 || rewards.r[j] == 0.2));
    }
    CHECK((rewards.r[4] == 0.0 || rewards.r[4] == 1.0));
    double sum = 0.0;
    for (double r : rewards.r) sum += r;
    CHECK(rewards.total == sum);
  }
}

TEST_CASE("verifier routing requires a verifier") {
  StepLayout layout = layout_4();
  Instance inst = make_instance();
  Rollout rollout = make_rollout(layout, {2, 1, 1, 0, 2});
  RewardConfig cfg;  // default: steps 1-2 routed to the verifier
  CHECK_THROWS_AS(hybrid_step_rewards(rollout, inst, nullptr, cfg),
                  ConfigError);
}

TEST_CASE("negative coefficients are rejected") {
  RewardConfig cfg;
  cfg.step_coefficients[0] = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("reward mode names round-trip") {
  CHECK(reward_mode_from_string("verifier") == RewardMode::kVerifier);
  CHECK(reward_mode_from_string("ground_truth") == RewardMode::kGroundTruth);
  CHECK_THROWS_AS(reward_mode_from_string("oracle"), ConfigError);
}
