#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "srl/optim.hpp"
#include "srl/reward.hpp"
#include "srl/rewardmodel.hpp"
#include "srl/selection.hpp"
#include "srl/synthenv.hpp"

namespace srl {

struct PolicyConfig {
  std::array<int, kNumSteps> step_lengths{1, 1, 1, 1, 1};
  double init_scale = 0.0;
  std::uint64_t seed = 0;
};

struct VerifierConfig {
  VerifierHyper hyper;
  int candidates_per_step = 2;
  double holdout_fraction = 0.0;  // tail of the dataset excluded from training
};

struct SelectionStanza {
  std::string method = "offline_reject";  // offline_reject | difficulty_window
                                          // | rm_select | stratified
  double difficulty_min = 0.01;
  double difficulty_max = 0.90;
  int group_size = 16;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  StratifyAxis axis = StratifyAxis::kLabel;
  // When true, cmd_train filters its pool through the difficulty window
  // (profiles measured under the starting policy) before training.
  bool dynamic_difficulty = false;
};

struct IoConfig {
  std::string dataset;
  std::string eval_dataset;
  std::string verifier_checkpoint;
  std::string policy_checkpoint;
  std::string judgments;
};

struct ExperimentConfig {
  int version = 1;
  std::vector<std::uint64_t> seeds{1};
  GeneratorSpec generator;
  PolicyConfig policy;
  RewardConfig reward;
  VerifierConfig verifier;
  TrainConfig train;
  SelectionStanza selection;
  std::vector<CurriculumStage> curriculum;
  IoConfig io;

  nlohmann::json raw;  // canonical parsed form, used for hashing
};

// Strict load: unknown keys are rejected with the offending key path, and
// every non-empty io path must exist.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const nlohmann::json& j,
                              const std::string& base_dir);

// FNV-1a over the canonical dump of the config (with any seed override
// already applied).
std::string config_hash(const nlohmann::json& canonical);

struct CommandResult {
  std::vector<std::string> written;
};

CommandResult cmd_datagen(ExperimentConfig config, const std::string& out_dir,
                          std::optional<std::uint64_t> seed_override = {});
CommandResult cmd_rm_train(ExperimentConfig config, const std::string& out_dir,
                           std::optional<std::uint64_t> seed_override = {});
CommandResult cmd_select(ExperimentConfig config, const std::string& out_dir,
                         std::optional<std::uint64_t> seed_override = {});
CommandResult cmd_train(ExperimentConfig config, const std::string& out_dir,
                        std::optional<std::uint64_t> seed_override = {});
CommandResult cmd_eval(ExperimentConfig config, const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override = {});
CommandResult cmd_compare(ExperimentConfig config_a, ExperimentConfig config_b,
                          const std::string& out_dir);

// Shared pipeline: builds the initial policy from the config, applies the
// configured data selection (dynamic difficulty or curriculum stages), and
// trains. Used by cmd_train, cmd_compare, and the acceptance suite.
TrainResult run_training(const ExperimentConfig& config, const Dataset& dataset,
                         const VerifierParams* verifier);

// Serialization of run artifacts (all embed config hash + seed).
std::string trace_csv(const std::vector<IterationRecord>& trace,
                      int group_size, const std::string& hash,
                      std::uint64_t seed);
std::string eval_csv(const EvalRecord& record, const std::string& hash,
                     std::uint64_t seed);

}  // namespace srl
