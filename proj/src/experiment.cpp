#include "srl/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "srl/rng.hpp"
#include "srl/textio.hpp"

namespace srl {

namespace {

namespace fs = std::filesystem;

void check_keys(const nlohmann::json& j, const std::string& scope,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) {
    throw ConfigError("config: '" + scope + "' must be an object");
  }
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw ConfigError("config: unknown key '" +
                        (scope.empty() ? item.key() : scope + "." + item.key()) +
                        "'");
    }
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

GeneratorSpec parse_generator(const nlohmann::json& j) {
  GeneratorSpec spec;
  check_keys(j, "generator",
             {"n", "feature_dim", "query_classes", "item_classes", "seed",
              "deceptive_fraction", "tag_distribution", "noise"});
  read_field(j, "n", spec.n);
  read_field(j, "feature_dim", spec.feature_dim);
  read_field(j, "query_classes", spec.query_classes);
  read_field(j, "item_classes", spec.item_classes);
  read_field(j, "seed", spec.seed);
  read_field(j, "deceptive_fraction", spec.deceptive_fraction);
  if (j.contains("tag_distribution")) {
    const auto& tags = j.at("tag_distribution");
    check_keys(tags, "generator.tag_distribution",
               {"domain", "query_type", "label"});
    read_field(tags, "domain", spec.tags.domain);
    read_field(tags, "query_type", spec.tags.query_type);
    read_field(tags, "label", spec.tags.label);
  }
  if (j.contains("noise")) {
    const auto& noise = j.at("noise");
    check_keys(noise, "generator.noise",
               {"min_sigma", "max_sigma", "category_noise_scale",
                "attribute_signal", "attribute_width"});
    read_field(noise, "min_sigma", spec.noise.min_sigma);
    read_field(noise, "max_sigma", spec.noise.max_sigma);
    read_field(noise, "category_noise_scale", spec.noise.category_noise_scale);
    read_field(noise, "attribute_signal", spec.noise.attribute_signal);
    read_field(noise, "attribute_width", spec.noise.attribute_width);
  }
  return spec;
}

PolicyConfig parse_policy(const nlohmann::json& j) {
  PolicyConfig cfg;
  check_keys(j, "policy", {"step_lengths", "init_scale", "seed"});
  if (j.contains("step_lengths")) {
    auto lengths = j.at("step_lengths").get<std::vector<int>>();
    if (lengths.size() != kNumSteps) {
      throw ConfigError("config: policy.step_lengths must have 5 entries");
    }
    std::copy(lengths.begin(), lengths.end(), cfg.step_lengths.begin());
  }
  read_field(j, "init_scale", cfg.init_scale);
  read_field(j, "seed", cfg.seed);
  return cfg;
}

RewardConfig parse_reward(const nlohmann::json& j) {
  RewardConfig cfg;
  check_keys(j, "reward",
             {"step_coefficients", "mode_per_step", "verdict_threshold"});
  if (j.contains("step_coefficients")) {
    auto coeffs = j.at("step_coefficients").get<std::vector<double>>();
    if (coeffs.size() != kNumSteps) {
      throw ConfigError("config: reward.step_coefficients must have 5 entries");
    }
    std::copy(coeffs.begin(), coeffs.end(), cfg.step_coefficients.begin());
  }
  if (j.contains("mode_per_step")) {
    auto modes = j.at("mode_per_step").get<std::vector<std::string>>();
    if (modes.size() != kNumSteps) {
      throw ConfigError("config: reward.mode_per_step must have 5 entries");
    }
    for (int s = 0; s < kNumSteps; ++s) {
      cfg.mode[s] = reward_mode_from_string(modes[static_cast<std::size_t>(s)]);
    }
  }
  read_field(j, "verdict_threshold", cfg.verdict_threshold);
  return cfg;
}

VerifierConfig parse_verifier(const nlohmann::json& j) {
  VerifierConfig cfg;
  check_keys(j, "verifier",
             {"learning_rate", "epochs", "l2", "seed", "candidates_per_step",
              "holdout_fraction"});
  read_field(j, "learning_rate", cfg.hyper.learning_rate);
  read_field(j, "epochs", cfg.hyper.epochs);
  read_field(j, "l2", cfg.hyper.l2);
  read_field(j, "seed", cfg.hyper.seed);
  read_field(j, "candidates_per_step", cfg.candidates_per_step);
  read_field(j, "holdout_fraction", cfg.holdout_fraction);
  return cfg;
}

TrainConfig parse_train(const nlohmann::json& j) {
  TrainConfig cfg;
  check_keys(j, "train",
             {"algo", "group_size", "ratio_clip", "kl_coefficient", "discount",
              "advantage_epsilon", "advantage_clip", "learning_rate",
              "rollout_batch", "iterations", "temperature", "top_k",
              "srpo_normalization", "batch_whitening", "optimizer", "seed",
              "convergence"});
  if (j.contains("algo")) cfg.algo = algo_from_string(j.at("algo"));
  read_field(j, "group_size", cfg.group_size);
  read_field(j, "ratio_clip", cfg.ratio_clip);
  read_field(j, "kl_coefficient", cfg.kl_coefficient);
  read_field(j, "discount", cfg.discount);
  read_field(j, "advantage_epsilon", cfg.advantage_epsilon);
  read_field(j, "advantage_clip", cfg.advantage_clip);
  read_field(j, "learning_rate", cfg.learning_rate);
  read_field(j, "rollout_batch", cfg.rollout_batch);
  read_field(j, "iterations", cfg.iterations);
  read_field(j, "temperature", cfg.temperature);
  read_field(j, "top_k", cfg.top_k);
  if (j.contains("srpo_normalization")) {
    std::string mode = j.at("srpo_normalization").get<std::string>();
    if (mode == "raw") {
      cfg.srpo_normalization = SrpoNormalization::kRaw;
    } else if (mode == "group_per_step") {
      cfg.srpo_normalization = SrpoNormalization::kGroupPerStep;
    } else {
      throw ConfigError("config: unknown train.srpo_normalization '" + mode +
                        "'");
    }
  }
  read_field(j, "batch_whitening", cfg.batch_whitening);
  if (j.contains("optimizer")) {
    std::string name = j.at("optimizer").get<std::string>();
    if (name == "sgd") {
      cfg.optimizer = OptimizerKind::kSgd;
    } else if (name == "adam") {
      cfg.optimizer = OptimizerKind::kAdam;
    } else {
      throw ConfigError("config: unknown train.optimizer '" + name + "'");
    }
  }
  read_field(j, "seed", cfg.seed);
  if (j.contains("convergence")) {
    const auto& conv = j.at("convergence");
    check_keys(conv, "train.convergence", {"window", "tolerance"});
    read_field(conv, "window", cfg.convergence.window);
    read_field(conv, "tolerance", cfg.convergence.tolerance);
  }
  return cfg;
}

SelectionStanza parse_selection(const nlohmann::json& j) {
  SelectionStanza cfg;
  check_keys(j, "selection",
             {"method", "difficulty_min", "difficulty_max", "group_size",
              "seed", "budget", "axis", "dynamic_difficulty"});
  read_field(j, "method", cfg.method);
  const std::set<std::string> methods = {"offline_reject", "difficulty_window",
                                         "rm_select", "stratified"};
  if (!methods.contains(cfg.method)) {
    throw ConfigError("config: unknown selection.method '" + cfg.method + "'");
  }
  read_field(j, "difficulty_min", cfg.difficulty_min);
  read_field(j, "difficulty_max", cfg.difficulty_max);
  read_field(j, "group_size", cfg.group_size);
  read_field(j, "seed", cfg.seed);
  read_field(j, "budget", cfg.budget);
  if (j.contains("axis")) {
    cfg.axis = stratify_axis_from_string(j.at("axis").get<std::string>());
  }
  read_field(j, "dynamic_difficulty", cfg.dynamic_difficulty);
  return cfg;
}

std::vector<CurriculumStage> parse_curriculum(const nlohmann::json& j) {
  check_keys(j, "curriculum", {"stages"});
  std::vector<CurriculumStage> stages;
  if (!j.contains("stages")) return stages;
  for (const auto& sj : j.at("stages")) {
    check_keys(sj, "curriculum.stages[]",
               {"name", "use_difficulty", "difficulty_min", "difficulty_max",
                "balance_axis", "balance_n", "iterations"});
    CurriculumStage stage;
    read_field(sj, "name", stage.name);
    if (stage.name.empty()) {
      throw ConfigError("config: curriculum stage without a name");
    }
    read_field(sj, "use_difficulty", stage.use_difficulty);
    read_field(sj, "difficulty_min", stage.difficulty_min);
    read_field(sj, "difficulty_max", stage.difficulty_max);
    if (sj.contains("balance_axis")) {
      stage.balance_axis =
          stratify_axis_from_string(sj.at("balance_axis").get<std::string>());
    }
    read_field(sj, "balance_n", stage.balance_n);
    read_field(sj, "iterations", stage.iterations);
    stages.push_back(stage);
  }
  return stages;
}

IoConfig parse_io(const nlohmann::json& j, const std::string& base_dir) {
  IoConfig io;
  check_keys(j, "io",
             {"dataset", "eval_dataset", "verifier_checkpoint",
              "policy_checkpoint", "judgments"});
  auto resolve = [&](const char* key, std::string& out) {
    if (!j.contains(key)) return;
    std::string value = j.at(key).get<std::string>();
    if (value.empty()) return;
    fs::path p(value);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    out = p.string();
    if (!fs::exists(out)) {
      throw ConfigError("config: io." + std::string(key) +
                        " references a missing file: " + out);
    }
  };
  resolve("dataset", io.dataset);
  resolve("eval_dataset", io.eval_dataset);
  resolve("verifier_checkpoint", io.verifier_checkpoint);
  resolve("policy_checkpoint", io.policy_checkpoint);
  resolve("judgments", io.judgments);
  return io;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j,
                              const std::string& base_dir) {
  check_keys(j, "",
             {"version", "seeds", "generator", "policy", "reward", "verifier",
              "train", "selection", "curriculum", "io"});
  ExperimentConfig cfg;
  if (!j.contains("version")) {
    throw ConfigError("config: missing 'version' field");
  }
  cfg.version = j.at("version").get<int>();
  if (cfg.version != 1) {
    throw ConfigError("config: unsupported version " +
                      std::to_string(cfg.version));
  }
  read_field(j, "seeds", cfg.seeds);
  if (cfg.seeds.empty()) {
    throw ConfigError("config: seeds must not be empty");
  }
  if (j.contains("generator")) cfg.generator = parse_generator(j.at("generator"));
  if (j.contains("policy")) cfg.policy = parse_policy(j.at("policy"));
  if (j.contains("reward")) cfg.reward = parse_reward(j.at("reward"));
  if (j.contains("verifier")) cfg.verifier = parse_verifier(j.at("verifier"));
  if (j.contains("train")) cfg.train = parse_train(j.at("train"));
  if (j.contains("selection")) cfg.selection = parse_selection(j.at("selection"));
  if (j.contains("curriculum")) cfg.curriculum = parse_curriculum(j.at("curriculum"));
  if (j.contains("io")) cfg.io = parse_io(j.at("io"), base_dir);
  cfg.raw = j;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  if (!fs::exists(path)) {
    throw ConfigError("config file not found: " + path);
  }
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError("config file is not valid JSON: " + path);
  }
  std::string base_dir = fs::path(path).parent_path().string();
  return parse_config(j, base_dir);
}

std::string config_hash(const nlohmann::json& canonical) {
  std::string dump = canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

namespace {

std::string out_path(const std::string& out_dir, const std::string& name) {
  return (fs::path(out_dir) / name).string();
}

// Applies --seed to the stanza the subcommand draws randomness from and
// keeps the canonical json in sync so the hash reflects the run.
void override_seed(ExperimentConfig& config, const std::string& stanza,
                   const std::string& key, std::uint64_t seed) {
  if (!config.raw.contains(stanza)) {
    config.raw[stanza] = nlohmann::json::object();
  }
  config.raw[stanza][key] = seed;
}

PolicyParams initial_policy(const ExperimentConfig& config,
                            const GeneratorSpec& spec) {
  StepLayout layout = make_step_layout(spec, config.policy.step_lengths);
  return PolicyParams::random_init(layout, spec.feature_dim,
                                   config.policy.init_scale,
                                   config.policy.seed);
}

PolicyParams policy_for(const ExperimentConfig& config, const Dataset& dataset) {
  if (!config.io.policy_checkpoint.empty()) {
    return load_policy(config.io.policy_checkpoint);
  }
  return initial_policy(config, dataset.spec);
}

}  // namespace

std::string trace_csv(const std::vector<IterationRecord>& trace,
                      int group_size, const std::string& hash,
                      std::uint64_t seed) {
  std::string out = "# config_hash=" + hash + " seed=" + std::to_string(seed) +
                    "\n";
  std::vector<std::string> header = {"iteration",        "stage", "mean_total_reward",
                                     "loss",             "mean_kl"};
  for (int s = 1; s <= kNumSteps; ++s) {
    header.push_back("acc_s" + std::to_string(s));
  }
  for (int k = 0; k <= group_size; ++k) {
    header.push_back("pass_" + std::to_string(k));
  }
  out += csv_row(header);
  for (const IterationRecord& row : trace) {
    std::vector<std::string> cells = {std::to_string(row.iteration), row.stage,
                                      format_double(row.mean_total_reward),
                                      format_double(row.loss),
                                      format_double(row.mean_kl)};
    for (double acc : row.step_accuracy) cells.push_back(format_double(acc));
    for (int count : row.pass_histogram) cells.push_back(std::to_string(count));
    out += csv_row(cells);
  }
  return out;
}

std::string eval_csv(const EvalRecord& record, const std::string& hash,
                     std::uint64_t seed) {
  std::string out = "# config_hash=" + hash + " seed=" + std::to_string(seed) +
                    "\n";
  std::vector<std::string> header = {"count", "accuracy", "macro_f1",
                                     "good_f1"};
  for (int c = 1; c <= kNumGrades; ++c) {
    header.push_back("f1_class" + std::to_string(c));
  }
  for (int s = 1; s <= kNumSteps; ++s) {
    header.push_back("acc_s" + std::to_string(s));
  }
  out += csv_row(header);
  std::vector<std::string> cells = {std::to_string(record.count),
                                    format_double(record.accuracy),
                                    format_double(record.macro_f1),
                                    format_double(record.good_f1)};
  for (double f1 : record.class_f1) cells.push_back(format_double(f1));
  for (double acc : record.step_accuracy) cells.push_back(format_double(acc));
  out += csv_row(cells);
  return out;
}

TrainResult run_training(const ExperimentConfig& config, const Dataset& dataset,
                         const VerifierParams* verifier) {
  PolicyParams init = policy_for(config, dataset);

  if (!config.curriculum.empty()) {
    StageTrainFn train_fn = [&](const CurriculumStage& stage,
                                const std::vector<std::size_t>& pool,
                                const PolicyParams& params,
                                int iteration_offset) {
      TrainOptions options;
      options.pool = pool;
      options.stage_name = stage.name;
      options.iteration_offset = iteration_offset;
      options.budget = stage.iterations;
      options.reference = &init;
      TrainResult stage_result = train(config.train, dataset, params, verifier,
                                       config.reward, options);
      return StageRunResult{std::move(stage_result.params),
                            std::move(stage_result.trace)};
    };
    CurriculumResult curriculum = run_curriculum(
        config.curriculum, dataset, init, config.selection.group_size,
        config.selection.seed, config.train.temperature, config.train.top_k,
        train_fn);
    return {std::move(curriculum.params), std::move(curriculum.trace)};
  }

  TrainOptions options;
  if (config.selection.dynamic_difficulty) {
    std::vector<DifficultyProfile> profiles = measure_difficulty(
        dataset, init, config.selection.group_size, config.selection.seed, 0,
        config.train.temperature, config.train.top_k);
    std::vector<std::uint64_t> ids =
        difficulty_window(profiles, config.selection.difficulty_min,
                          config.selection.difficulty_max);
    std::set<std::uint64_t> id_set(ids.begin(), ids.end());
    for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
      if (id_set.contains(dataset.instances[i].id)) options.pool.push_back(i);
    }
    if (options.pool.empty()) {
      throw CurriculumExhausted(
          "train: the difficulty window filtered out every instance");
    }
  }
  return train(config.train, dataset, init, verifier, config.reward, options);
}

CommandResult cmd_datagen(ExperimentConfig config, const std::string& out_dir,
                          std::optional<std::uint64_t> seed_override) {
  if (seed_override) {
    config.generator.seed = *seed_override;
    override_seed(config, "generator", "seed", *seed_override);
  }
  std::string hash = config_hash(config.raw);
  Dataset dataset = generate_dataset(config.generator);
  std::string path = out_path(out_dir, "dataset.jsonl");
  save_dataset(dataset, path, hash, config.generator.seed);
  return {{path}};
}

CommandResult cmd_rm_train(ExperimentConfig config, const std::string& out_dir,
                           std::optional<std::uint64_t> seed_override) {
  if (seed_override) {
    config.verifier.hyper.seed = *seed_override;
    override_seed(config, "verifier", "seed", *seed_override);
  }
  std::string hash = config_hash(config.raw);
  if (config.io.dataset.empty()) {
    throw ConfigError("rm-train: config io.dataset is required");
  }
  Dataset dataset = load_dataset(config.io.dataset);

  CommandResult result;
  std::vector<StepJudgment> judgments;
  if (!config.io.judgments.empty()) {
    judgments = load_judgments(config.io.judgments);
  } else {
    judgments = synthesize_judgments(dataset, config.verifier.candidates_per_step,
                                     config.verifier.hyper.seed);
    std::string jpath = out_path(out_dir, "judgments.jsonl");
    save_judgments(judgments, jpath, hash, config.verifier.hyper.seed);
    result.written.push_back(jpath);
  }

  // Optional holdout: keep the tail instances out of training so the
  // checkpoint can be scored on unseen data.
  if (config.verifier.holdout_fraction > 0.0) {
    std::size_t train_count = static_cast<std::size_t>(
        static_cast<double>(dataset.instances.size()) *
        (1.0 - config.verifier.holdout_fraction));
    std::erase_if(judgments, [&](const StepJudgment& judgment) {
      return judgment.instance_id >= train_count;
    });
  }

  VerifierParams verifier =
      train_verifier(dataset, judgments, config.verifier.hyper);
  std::string vpath = out_path(out_dir, "verifier.json");
  save_verifier(verifier, vpath, hash, config.verifier.hyper.seed);
  result.written.push_back(vpath);
  return result;
}

CommandResult cmd_select(ExperimentConfig config, const std::string& out_dir,
                         std::optional<std::uint64_t> seed_override) {
  if (seed_override) {
    config.selection.seed = *seed_override;
    override_seed(config, "selection", "seed", *seed_override);
  }
  std::string hash = config_hash(config.raw);
  if (config.io.dataset.empty()) {
    throw ConfigError("select-data: config io.dataset is required");
  }
  Dataset dataset = load_dataset(config.io.dataset);
  PolicyParams policy = policy_for(config, dataset);

  nlohmann::ordered_json report;
  report["config_hash"] = hash;
  report["seed"] = config.selection.seed;
  report["method"] = config.selection.method;
  report["input_count"] = dataset.instances.size();

  Dataset selected;
  selected.spec = dataset.spec;
  if (config.selection.method == "offline_reject") {
    auto [kept, rejection] = offline_reject(
        dataset, policy, config.selection.group_size, config.selection.seed);
    selected = std::move(kept);
    report["removed_all_correct"] = rejection.removed_all_correct;
    report["removed_all_incorrect"] = rejection.removed_all_incorrect;
  } else if (config.selection.method == "difficulty_window") {
    std::vector<DifficultyProfile> profiles = measure_difficulty(
        dataset, policy, config.selection.group_size, config.selection.seed, 0,
        config.train.temperature, config.train.top_k);
    std::vector<std::uint64_t> ids =
        difficulty_window(profiles, config.selection.difficulty_min,
                          config.selection.difficulty_max);
    std::set<std::uint64_t> id_set(ids.begin(), ids.end());
    for (const Instance& instance : dataset.instances) {
      if (id_set.contains(instance.id)) selected.instances.push_back(instance);
    }
    report["difficulty_min"] = config.selection.difficulty_min;
    report["difficulty_max"] = config.selection.difficulty_max;
  } else if (config.selection.method == "rm_select") {
    if (config.io.verifier_checkpoint.empty()) {
      throw ConfigError("select-data: rm_select requires io.verifier_checkpoint");
    }
    VerifierParams verifier = load_verifier(config.io.verifier_checkpoint);
    std::vector<std::uint64_t> ids =
        rm_select(verifier, dataset, policy, config.selection.budget,
                  config.reward.verdict_threshold);
    std::set<std::uint64_t> id_set(ids.begin(), ids.end());
    for (const Instance& instance : dataset.instances) {
      if (id_set.contains(instance.id)) selected.instances.push_back(instance);
    }
    report["budget"] = config.selection.budget;
  } else {  // stratified
    selected = stratified_sample(dataset, config.selection.axis,
                                 config.selection.budget,
                                 config.selection.seed);
    report["axis"] = to_string(config.selection.axis);
    report["budget"] = config.selection.budget;
  }

  report["selected_count"] = selected.instances.size();
  std::string dpath = out_path(out_dir, "selected.jsonl");
  save_dataset(selected, dpath, hash, config.selection.seed);
  std::string rpath = out_path(out_dir, "selection_report.json");
  write_file(rpath, report.dump(2) + "\n");
  return {{dpath, rpath}};
}

CommandResult cmd_train(ExperimentConfig config, const std::string& out_dir,
                        std::optional<std::uint64_t> seed_override) {
  if (seed_override) {
    config.train.seed = *seed_override;
    override_seed(config, "train", "seed", *seed_override);
  }
  std::string hash = config_hash(config.raw);
  if (config.io.dataset.empty()) {
    throw ConfigError("train: config io.dataset is required");
  }
  Dataset dataset = load_dataset(config.io.dataset);

  VerifierParams verifier;
  const VerifierParams* verifier_ptr = nullptr;
  if (!config.io.verifier_checkpoint.empty()) {
    verifier = load_verifier(config.io.verifier_checkpoint);
    verifier_ptr = &verifier;
  }

  TrainResult result = run_training(config, dataset, verifier_ptr);
  std::string ppath = out_path(out_dir, "policy.json");
  save_policy(result.params, ppath, hash, config.train.seed);
  std::string tpath = out_path(out_dir, "trace.csv");
  write_file(tpath, trace_csv(result.trace, config.train.group_size, hash,
                              config.train.seed));
  return {{ppath, tpath}};
}

CommandResult cmd_eval(ExperimentConfig config, const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override) {
  std::uint64_t seed = seed_override.value_or(config.seeds.front());
  std::string hash = config_hash(config.raw);
  if (config.io.dataset.empty()) {
    throw ConfigError("eval: config io.dataset is required");
  }
  if (config.io.policy_checkpoint.empty()) {
    throw ConfigError("eval: config io.policy_checkpoint is required");
  }
  Dataset dataset = load_dataset(config.io.dataset);
  PolicyParams policy = load_policy(config.io.policy_checkpoint);
  EvalRecord record = evaluate(policy, dataset);
  std::string path = out_path(out_dir, "metrics.csv");
  write_file(path, eval_csv(record, hash, seed));
  return {{path}};
}

CommandResult cmd_compare(ExperimentConfig config_a, ExperimentConfig config_b,
                          const std::string& out_dir) {
  if (config_a.io.dataset.empty() || config_a.io.eval_dataset.empty()) {
    throw ConfigError("compare: config A needs io.dataset and io.eval_dataset");
  }
  if (config_b.io.dataset.empty() || config_b.io.eval_dataset.empty()) {
    throw ConfigError("compare: config B needs io.dataset and io.eval_dataset");
  }
  std::string hash_a = config_hash(config_a.raw);
  std::string hash_b = config_hash(config_b.raw);

  Dataset dataset_a = load_dataset(config_a.io.dataset);
  Dataset dataset_b = load_dataset(config_b.io.dataset);
  Dataset eval_a = load_dataset(config_a.io.eval_dataset);
  Dataset eval_b = load_dataset(config_b.io.eval_dataset);

  VerifierParams verifier_a;
  const VerifierParams* verifier_a_ptr = nullptr;
  if (!config_a.io.verifier_checkpoint.empty()) {
    verifier_a = load_verifier(config_a.io.verifier_checkpoint);
    verifier_a_ptr = &verifier_a;
  }
  VerifierParams verifier_b;
  const VerifierParams* verifier_b_ptr = nullptr;
  if (!config_b.io.verifier_checkpoint.empty()) {
    verifier_b = load_verifier(config_b.io.verifier_checkpoint);
    verifier_b_ptr = &verifier_b;
  }

  std::string out = "# config_hash_a=" + hash_a + " config_hash_b=" + hash_b +
                    "\n";
  out += csv_row({"seed", "macro_f1_a", "macro_f1_b", "delta", "winner"});
  int wins_a = 0;
  int wins_b = 0;
  int ties = 0;
  for (std::uint64_t seed : config_a.seeds) {
    ExperimentConfig arm_a = config_a;
    arm_a.train.seed = seed;
    ExperimentConfig arm_b = config_b;
    arm_b.train.seed = seed;
    TrainResult result_a = run_training(arm_a, dataset_a, verifier_a_ptr);
    TrainResult result_b = run_training(arm_b, dataset_b, verifier_b_ptr);
    double f1_a = evaluate(result_a.params, eval_a).macro_f1;
    double f1_b = evaluate(result_b.params, eval_b).macro_f1;
    std::string winner = "tie";
    if (f1_a > f1_b) {
      winner = "a";
      ++wins_a;
    } else if (f1_b > f1_a) {
      winner = "b";
      ++wins_b;
    } else {
      ++ties;
    }
    out += csv_row({std::to_string(seed), format_double(f1_a),
                    format_double(f1_b), format_double(f1_a - f1_b), winner});
  }
  std::string cpath = out_path(out_dir, "compare.csv");
  write_file(cpath, out);

  nlohmann::ordered_json summary;
  summary["config_hash_a"] = hash_a;
  summary["config_hash_b"] = hash_b;
  summary["label_a"] = to_string(config_a.train.algo);
  summary["label_b"] = to_string(config_b.train.algo);
  summary["seeds"] = config_a.seeds;
  summary["wins_a"] = wins_a;
  summary["wins_b"] = wins_b;
  summary["ties"] = ties;
  std::string spath = out_path(out_dir, "compare_summary.json");
  write_file(spath, summary.dump(2) + "\n");
  return {{cpath, spath}};
}

}  // namespace srl
