#include "srl/selection.hpp"

#include <algorithm>
#include <map>

#include "srl/reward.hpp"
#include "srl/rng.hpp"

namespace srl {

std::vector<DifficultyProfile> measure_difficulty(
    const Dataset& dataset, const PolicyParams& policy, int group_size,
    std::uint64_t seed, int measured_at, double temperature, int top_k) {
  if (group_size < 2) {
    throw ConfigError("measure_difficulty: group_size must be >= 2");
  }
  std::vector<DifficultyProfile> profiles;
  profiles.reserve(dataset.instances.size());
  for (const Instance& instance : dataset.instances) {
    std::vector<Rollout> rollouts =
        sample_group(policy, instance, group_size, temperature, top_k,
                     derive_seed(seed, instance.id, 0x70726fULL));
    DifficultyProfile profile;
    profile.instance_id = instance.id;
    profile.measured_at = measured_at;
    for (const Rollout& rollout : rollouts) {
      for (int s = 1; s <= kNumSteps; ++s) {
        if (parse_step(rollout, s) == step_ground_truth(instance, s)) {
          profile.step_pass_rate[s - 1] += 1.0;
        }
      }
      if (parse_step(rollout, kNumSteps) == instance.gt_grade) {
        profile.pass_rate += 1.0;
      }
    }
    double inv = 1.0 / static_cast<double>(group_size);
    profile.pass_rate *= inv;
    for (double& r : profile.step_pass_rate) r *= inv;
    profiles.push_back(profile);
  }
  return profiles;
}

std::pair<Dataset, RejectionReport> offline_reject(const Dataset& dataset,
                                                   const PolicyParams& policy,
                                                   int group_size,
                                                   std::uint64_t seed) {
  std::vector<DifficultyProfile> profiles =
      measure_difficulty(dataset, policy, group_size, seed, 0);
  Dataset retained;
  retained.spec = dataset.spec;
  RejectionReport report;
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    if (profiles[i].pass_rate == 0.0) {
      ++report.removed_all_incorrect;
    } else if (profiles[i].pass_rate == 1.0) {
      ++report.removed_all_correct;
    } else {
      retained.instances.push_back(dataset.instances[i]);
    }
  }
  report.retained = retained.instances.size();
  return {std::move(retained), report};
}

std::vector<std::uint64_t> difficulty_window(
    const std::vector<DifficultyProfile>& profiles, double min_threshold,
    double max_threshold) {
  if (!(min_threshold >= 0.0 && min_threshold < max_threshold &&
        max_threshold <= 1.0)) {
    throw ConfigError("difficulty_window: require 0 <= min < max <= 1");
  }
  std::vector<std::uint64_t> kept;
  for (const DifficultyProfile& profile : profiles) {
    if (profile.pass_rate >= min_threshold &&
        profile.pass_rate <= max_threshold) {
      kept.push_back(profile.instance_id);
    }
  }
  return kept;
}

StratifyAxis stratify_axis_from_string(const std::string& name) {
  if (name == "label") return StratifyAxis::kLabel;
  if (name == "query_type") return StratifyAxis::kQueryType;
  if (name == "domain") return StratifyAxis::kDomain;
  throw ConfigError("selection: unknown stratify axis '" + name + "'");
}

std::string to_string(StratifyAxis axis) {
  switch (axis) {
    case StratifyAxis::kLabel:
      return "label";
    case StratifyAxis::kQueryType:
      return "query_type";
    default:
      return "domain";
  }
}

namespace {

int axis_value(const Instance& instance, StratifyAxis axis) {
  switch (axis) {
    case StratifyAxis::kLabel:
      return instance.tags.label;
    case StratifyAxis::kQueryType:
      return instance.tags.query_type;
    default:
      return instance.tags.domain;
  }
}

std::vector<int> axis_domain(const GeneratorSpec& spec, StratifyAxis axis) {
  std::vector<int> keys;
  switch (axis) {
    case StratifyAxis::kLabel:
      for (int g = 1; g <= kNumGrades; ++g) keys.push_back(g);
      break;
    case StratifyAxis::kQueryType:
      for (std::size_t i = 0; i < spec.tags.query_type.size(); ++i) {
        keys.push_back(static_cast<int>(i));
      }
      break;
    default:
      for (std::size_t i = 0; i < spec.tags.domain.size(); ++i) {
        keys.push_back(static_cast<int>(i));
      }
      break;
  }
  return keys;
}

}  // namespace

Dataset stratified_sample(const Dataset& dataset, StratifyAxis axis,
                          std::size_t n, std::uint64_t seed, bool exact) {
  if (n == 0) {
    Dataset empty;
    empty.spec = dataset.spec;
    return empty;
  }
  std::vector<int> keys = axis_domain(dataset.spec, axis);
  std::map<int, std::vector<std::size_t>> strata;
  for (int key : keys) strata[key] = {};
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    int key = axis_value(dataset.instances[i], axis);
    auto it = strata.find(key);
    if (it == strata.end()) {
      throw DataError("stratified_sample: instance tag " + std::to_string(key) +
                      " outside the declared " + to_string(axis) + " domain");
    }
    it->second.push_back(i);
  }

  std::size_t num_strata = strata.size();
  std::size_t base = n / num_strata;
  std::size_t remainder = n % num_strata;

  Dataset selected;
  selected.spec = dataset.spec;
  std::size_t rank = 0;
  std::vector<std::size_t> picked;
  for (auto& [key, members] : strata) {
    std::size_t quota = base + (rank < remainder ? 1 : 0);
    ++rank;
    if (members.empty() && exact) {
      throw SelectionError("stratified_sample: stratum " + to_string(axis) +
                           "=" + std::to_string(key) + " is empty");
    }
    if (members.size() < quota) {
      if (exact) {
        throw SelectionError("stratified_sample: stratum " + to_string(axis) +
                             "=" + std::to_string(key) + " has only " +
                             std::to_string(members.size()) + " of " +
                             std::to_string(quota) + " requested instances");
      }
      quota = members.size();
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(key), 0x737472ULL));
    for (std::size_t i = 0; i < quota; ++i) {
      std::size_t j = i + rng.uniform_index(members.size() - i);
      std::swap(members[i], members[j]);
    }
    members.resize(quota);
    picked.insert(picked.end(), members.begin(), members.end());
  }
  std::sort(picked.begin(), picked.end());
  for (std::size_t index : picked) {
    selected.instances.push_back(dataset.instances[index]);
  }
  return selected;
}

CurriculumResult run_curriculum(const std::vector<CurriculumStage>& stages,
                                const Dataset& dataset,
                                const PolicyParams& initial,
                                int profile_group_size,
                                std::uint64_t profile_seed,
                                double profile_temperature, int profile_top_k,
                                const StageTrainFn& train_fn) {
  if (stages.empty()) {
    throw ConfigError("curriculum: no stages configured");
  }
  for (const CurriculumStage& stage : stages) {
    if (stage.iterations < 1) {
      throw ConfigError("curriculum: stage '" + stage.name +
                        "' has a non-positive budget");
    }
  }

  CurriculumResult result;
  result.params = initial;
  int iteration_offset = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const CurriculumStage& stage = stages[s];

    std::vector<std::size_t> pool;
    if (stage.use_difficulty) {
      std::vector<DifficultyProfile> profiles = measure_difficulty(
          dataset, result.params, profile_group_size,
          derive_seed(profile_seed, s, 0x637572ULL), iteration_offset,
          profile_temperature, profile_top_k);
      std::vector<std::uint64_t> ids = difficulty_window(
          profiles, stage.difficulty_min, stage.difficulty_max);
      std::vector<bool> keep(dataset.instances.size(), false);
      // Profiles are emitted in dataset order, so ids map back by search.
      std::size_t cursor = 0;
      for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
        if (cursor < ids.size() && dataset.instances[i].id == ids[cursor]) {
          keep[i] = true;
          ++cursor;
        }
      }
      for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
        if (keep[i]) pool.push_back(i);
      }
    } else {
      pool.resize(dataset.instances.size());
      for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    }

    if (stage.balance_axis.has_value() && !pool.empty()) {
      Dataset view;
      view.spec = dataset.spec;
      for (std::size_t i : pool) view.instances.push_back(dataset.instances[i]);
      // balance_n == 0 requests the largest exactly-balanced subset.
      std::size_t n = stage.balance_n;
      if (n == 0) {
        std::map<int, std::size_t> counts;
        for (const Instance& inst : view.instances) {
          int key = *stage.balance_axis == StratifyAxis::kLabel
                        ? inst.tags.label
                        : (*stage.balance_axis == StratifyAxis::kQueryType
                               ? inst.tags.query_type
                               : inst.tags.domain);
          ++counts[key];
        }
        std::size_t smallest = view.instances.size();
        for (const auto& [key, count] : counts) {
          smallest = std::min(smallest, count);
        }
        n = smallest * counts.size();
      }
      Dataset balanced =
          stratified_sample(view, *stage.balance_axis, n,
                            derive_seed(profile_seed, s, 0x62616cULL),
                            /*exact=*/false);
      std::vector<std::uint64_t> chosen_ids;
      chosen_ids.reserve(balanced.instances.size());
      for (const Instance& inst : balanced.instances) {
        chosen_ids.push_back(inst.id);
      }
      std::sort(chosen_ids.begin(), chosen_ids.end());
      std::vector<std::size_t> filtered;
      for (std::size_t i : pool) {
        if (std::binary_search(chosen_ids.begin(), chosen_ids.end(),
                               dataset.instances[i].id)) {
          filtered.push_back(i);
        }
      }
      pool = std::move(filtered);
    }

    if (pool.empty()) {
      throw CurriculumExhausted("curriculum: stage '" + stage.name +
                                "' filtered out every instance");
    }

    StageRunResult stage_result =
        train_fn(stage, pool, result.params, iteration_offset);
    result.params = std::move(stage_result.params);
    for (IterationRecord& row : stage_result.rows) {
      row.stage = stage.name;
      result.trace.push_back(std::move(row));
    }
    iteration_offset += stage.iterations;
  }
  return result;
}

}  // namespace srl
