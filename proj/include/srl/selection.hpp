#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srl/common.hpp"
#include "srl/optim.hpp"
#include "srl/policy.hpp"
#include "srl/synthenv.hpp"

namespace srl {

// Measured difficulty of one instance under a given policy: the share of G
// sampled rollouts whose final grade is correct, plus per-step rates.
struct DifficultyProfile {
  std::uint64_t instance_id = 0;
  double pass_rate = 0.0;
  std::array<double, kNumSteps> step_pass_rate{};
  int measured_at = 0;
};

std::vector<DifficultyProfile> measure_difficulty(
    const Dataset& dataset, const PolicyParams& policy, int group_size,
    std::uint64_t seed, int measured_at, double temperature = 0.99,
    int top_k = 100);

struct RejectionReport {
  std::size_t removed_all_correct = 0;
  std::size_t removed_all_incorrect = 0;
  std::size_t retained = 0;
};

// Drops exactly the instances whose group pass-rate is 0 or 1 under the
// policy; those groups carry no relative training signal.
std::pair<Dataset, RejectionReport> offline_reject(const Dataset& dataset,
                                                   const PolicyParams& policy,
                                                   int group_size,
                                                   std::uint64_t seed);

// Instance ids whose pass_rate lies in [min_threshold, max_threshold].
std::vector<std::uint64_t> difficulty_window(
    const std::vector<DifficultyProfile>& profiles, double min_threshold,
    double max_threshold);

enum class StratifyAxis { kLabel, kQueryType, kDomain };

StratifyAxis stratify_axis_from_string(const std::string& name);
std::string to_string(StratifyAxis axis);

// Balanced subset along the axis: per-stratum counts differ by at most one,
// the remainder goes to the lowest stratum keys, membership within a stratum
// is a seeded shuffle. In exact mode a stratum that is missing or too small
// raises SelectionError naming it; otherwise quotas are capped to what is
// available.
Dataset stratified_sample(const Dataset& dataset, StratifyAxis axis,
                          std::size_t n, std::uint64_t seed, bool exact = true);

struct CurriculumStage {
  std::string name;
  bool use_difficulty = true;
  double difficulty_min = 0.0;
  double difficulty_max = 1.0;
  std::optional<StratifyAxis> balance_axis;
  std::size_t balance_n = 0;  // with a balance_axis, 0 = largest balanced subset
  int iterations = 0;
};

struct StageRunResult {
  PolicyParams params;
  std::vector<IterationRecord> rows;
};

// Runs training for one stage over the selected instance indices, starting
// from `params`, offsetting trace iteration numbers by `iteration_offset`.
using StageTrainFn = std::function<StageRunResult(
    const CurriculumStage& stage, const std::vector<std::size_t>& pool,
    const PolicyParams& params, int iteration_offset)>;

struct CurriculumResult {
  PolicyParams params;
  std::vector<IterationRecord> trace;
};

// Multi-stage schedule: difficulty profiles are re-measured at every stage
// boundary under the current policy, the stage filter is applied, and the
// stage is trained via train_fn. An empty stage pool raises
// CurriculumExhausted naming the stage.
CurriculumResult run_curriculum(const std::vector<CurriculumStage>& stages,
                                const Dataset& dataset,
                                const PolicyParams& initial,
                                int profile_group_size,
                                std::uint64_t profile_seed,
                                double profile_temperature, int profile_top_k,
                                const StageTrainFn& train_fn);

}  // namespace srl
