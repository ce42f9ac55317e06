#include "srl/rewardmodel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "srl/rng.hpp"
#include "srl/textio.hpp"

namespace srl {

namespace {

std::array<int, kNumSteps> candidate_spaces(const GeneratorSpec& spec) {
  return {spec.query_classes, spec.item_classes, 2, 2, kNumGrades};
}

// Candidate answers are encoded 0-based; step 5 grades map to 0..3.
int encode_candidate(int step, int candidate) {
  return step == kNumSteps ? candidate - 1 : candidate;
}

void fill_verifier_features(const Instance& instance, int vocab,
                            int encoded_candidate,
                            std::vector<double>& features) {
  std::size_t d = instance.features.size();
  features.assign(1 + d + static_cast<std::size_t>(vocab) * (1 + d), 0.0);
  features[0] = 1.0;
  std::copy(instance.features.begin(), instance.features.end(),
            features.begin() + 1);
  std::size_t base = 1 + d;
  features[base + static_cast<std::size_t>(encoded_candidate)] = 1.0;
  std::size_t inter =
      base + static_cast<std::size_t>(vocab) +
      static_cast<std::size_t>(encoded_candidate) * d;
  for (std::size_t i = 0; i < d; ++i) {
    features[inter + i] = instance.features[i];
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::size_t VerifierParams::head_dim(int step_index) const {
  std::size_t d = static_cast<std::size_t>(feature_dim);
  std::size_t v = static_cast<std::size_t>(vocab[step_index]);
  return 1 + d + v * (1 + d);
}

VerifierParams train_verifier(
    const Dataset& dataset, const std::vector<StepJudgment>& judgments,
    const VerifierHyper& hyper,
    std::array<std::vector<double>, kNumSteps>* loss_history) {
  if (hyper.epochs < 1 || !(hyper.learning_rate > 0.0) || hyper.l2 < 0.0) {
    throw ConfigError("verifier: invalid hyperparameters");
  }

  std::unordered_map<std::uint64_t, std::size_t> by_id;
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    by_id[dataset.instances[i].id] = i;
  }

  // Canonical ordering makes training invariant to input permutation.
  std::vector<StepJudgment> ordered = judgments;
  std::sort(ordered.begin(), ordered.end(),
            [](const StepJudgment& a, const StepJudgment& b) {
              return std::tie(a.step, a.instance_id, a.candidate, a.correct) <
                     std::tie(b.step, b.instance_id, b.candidate, b.correct);
            });

  VerifierParams verifier;
  verifier.feature_dim = dataset.spec.feature_dim;
  auto spaces = candidate_spaces(dataset.spec);
  for (int j = 0; j < kNumSteps; ++j) verifier.vocab[j] = spaces[j];
  verifier.epochs = hyper.epochs;
  verifier.seed = hyper.seed;

  std::vector<double> features;
  for (int step = 1; step <= kNumSteps; ++step) {
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (const StepJudgment& judgment : ordered) {
      if (judgment.step != step) continue;
      auto it = by_id.find(judgment.instance_id);
      if (it == by_id.end()) {
        throw DataError("verifier: judgment references unknown instance id " +
                        std::to_string(judgment.instance_id));
      }
      int encoded = encode_candidate(step, judgment.candidate);
      if (encoded < 0 || encoded >= verifier.vocab[step - 1]) {
        throw DataError("verifier: candidate out of range for step " +
                        std::to_string(step));
      }
      fill_verifier_features(dataset.instances[it->second],
                             verifier.vocab[step - 1], encoded, features);
      xs.push_back(features);
      ys.push_back(judgment.correct ? 1.0 : 0.0);
    }
    if (xs.empty()) {
      throw TrainingError("verifier: no judgments for step " +
                          std::to_string(step));
    }
    bool has_positive = std::find(ys.begin(), ys.end(), 1.0) != ys.end();
    bool has_negative = std::find(ys.begin(), ys.end(), 0.0) != ys.end();
    if (!has_positive || !has_negative) {
      throw TrainingError("verifier: step " + std::to_string(step) +
                          " judgments contain a single label class");
    }

    std::size_t dim = verifier.head_dim(step - 1);
    std::vector<double>& w = verifier.heads[step - 1].weights;
    w.assign(dim, 0.0);
    std::vector<double> grad(dim);
    double inv_n = 1.0 / static_cast<double>(xs.size());
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t s = 0; s < xs.size(); ++s) {
        double z = 0.0;
        for (std::size_t c = 0; c < dim; ++c) z += w[c] * xs[s][c];
        double p = sigmoid(z);
        double err = p - ys[s];
        for (std::size_t c = 0; c < dim; ++c) grad[c] += err * xs[s][c];
        // Stable cross-entropy: log(1 + exp(-|z|)) + max(z,0) - z*y.
        loss += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) -
                z * ys[s];
      }
      loss *= inv_n;
      double sqnorm = 0.0;
      for (double c : w) sqnorm += c * c;
      loss += 0.5 * hyper.l2 * sqnorm;
      if (loss_history != nullptr) {
        (*loss_history)[static_cast<std::size_t>(step - 1)].push_back(loss);
      }
      for (std::size_t c = 0; c < dim; ++c) {
        w[c] -= hyper.learning_rate * (grad[c] * inv_n + hyper.l2 * w[c]);
      }
    }
  }
  return verifier;
}

std::pair<double, bool> verdict(const VerifierParams& verifier,
                                const Instance& instance, int step,
                                int candidate, double threshold) {
  if (step < 1 || step > kNumSteps) {
    throw DataError("verdict: step index out of range");
  }
  int encoded = encode_candidate(step, candidate);
  if (encoded < 0 || encoded >= verifier.vocab[step - 1]) {
    throw DataError("verdict: candidate out of range for step " +
                    std::to_string(step));
  }
  const std::vector<double>& w = verifier.heads[step - 1].weights;
  if (w.size() != verifier.head_dim(step - 1)) {
    throw ConfigError("verdict: verifier not trained for step " +
                      std::to_string(step));
  }
  std::vector<double> features;
  fill_verifier_features(instance, verifier.vocab[step - 1], encoded, features);
  double z = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) z += w[c] * features[c];
  double probability = sigmoid(z);
  return {probability, probability >= threshold};
}

std::vector<StepJudgment> synthesize_judgments(const Dataset& dataset,
                                               int candidates_per_step,
                                               std::uint64_t seed) {
  if (candidates_per_step < 1) {
    throw ConfigError("judgments: candidates_per_step must be >= 1");
  }
  auto spaces = candidate_spaces(dataset.spec);
  std::vector<StepJudgment> judgments;
  judgments.reserve(dataset.instances.size() * kNumSteps *
                    static_cast<std::size_t>(candidates_per_step));
  for (const Instance& instance : dataset.instances) {
    Rng rng(derive_seed(seed, instance.id, 0x6a646765ULL));
    for (int step = 1; step <= kNumSteps; ++step) {
      int space = spaces[step - 1];
      for (int k = 0; k < candidates_per_step; ++k) {
        int encoded =
            static_cast<int>(rng.uniform_index(static_cast<std::size_t>(space)));
        int candidate = step == kNumSteps ? encoded + 1 : encoded;
        judgments.push_back({instance.id, step, candidate,
                             candidate == step_ground_truth(instance, step)});
      }
    }
  }
  return judgments;
}

std::vector<std::uint64_t> rm_select(const VerifierParams& verifier,
                                     const Dataset& dataset,
                                     const PolicyParams& policy,
                                     std::size_t budget, double threshold) {
  if (budget > dataset.instances.size()) {
    throw ConfigError("rm_select: budget exceeds dataset size");
  }
  struct Flagged {
    std::uint64_t id;
    int flags;
  };
  std::vector<Flagged> flagged;
  flagged.reserve(dataset.instances.size());
  for (const Instance& instance : dataset.instances) {
    Rollout rollout = greedy_rollout(policy, instance);
    int flags = 0;
    for (int step = 1; step <= kNumSteps; ++step) {
      int predicted = parse_step(rollout, step);
      bool ok;
      if (step <= 2) {
        ok = verdict(verifier, instance, step, predicted, threshold).second;
      } else {
        ok = predicted == step_ground_truth(instance, step);
      }
      if (!ok) ++flags;
    }
    flagged.push_back({instance.id, flags});
  }
  std::sort(flagged.begin(), flagged.end(),
            [](const Flagged& a, const Flagged& b) {
              if (a.flags != b.flags) return a.flags > b.flags;
              return a.id < b.id;
            });
  std::vector<std::uint64_t> selected;
  selected.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) selected.push_back(flagged[i].id);
  return selected;
}

void save_verifier(const VerifierParams& verifier, const std::string& path,
                   const std::string& config_hash, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["record"] = "verifier_checkpoint";
  j["format_version"] = 1;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["feature_dim"] = verifier.feature_dim;
  j["vocab"] = verifier.vocab;
  j["epochs"] = verifier.epochs;
  j["train_seed"] = verifier.seed;
  nlohmann::ordered_json heads = nlohmann::ordered_json::array();
  for (const VerifierHead& h : verifier.heads) {
    heads.push_back({{"weights", h.weights}});
  }
  j["heads"] = heads;
  write_file(path, j.dump() + "\n");
}

VerifierParams load_verifier(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || j.value("record", "") != "verifier_checkpoint") {
    throw DataError("not a verifier checkpoint: " + path);
  }
  VerifierParams verifier;
  verifier.feature_dim = j.at("feature_dim").get<int>();
  auto vocab = j.at("vocab").get<std::vector<int>>();
  if (vocab.size() != kNumSteps) {
    throw DataError("verifier checkpoint: bad vocab list: " + path);
  }
  std::copy(vocab.begin(), vocab.end(), verifier.vocab.begin());
  verifier.epochs = j.at("epochs").get<int>();
  verifier.seed = j.at("train_seed").get<std::uint64_t>();
  const auto& heads = j.at("heads");
  for (int s = 0; s < kNumSteps; ++s) {
    verifier.heads[s].weights =
        heads[s].at("weights").get<std::vector<double>>();
  }
  return verifier;
}

void save_judgments(const std::vector<StepJudgment>& judgments,
                    const std::string& path, const std::string& config_hash,
                    std::uint64_t seed) {
  std::ostringstream out;
  nlohmann::ordered_json header;
  header["record"] = "header";
  header["format_version"] = 1;
  header["config_hash"] = config_hash;
  header["seed"] = seed;
  out << header.dump() << '\n';
  for (const StepJudgment& judgment : judgments) {
    nlohmann::ordered_json j;
    j["record"] = "judgment";
    j["instance_id"] = judgment.instance_id;
    j["step"] = judgment.step;
    j["candidate"] = judgment.candidate;
    j["correct"] = judgment.correct;
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

std::vector<StepJudgment> load_judgments(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("judgments file not found: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("judgments file is empty: " + path);
  }
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("record", "") != "header") {
    throw DataError("judgments file missing header record: " + path);
  }
  std::vector<StepJudgment> judgments;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("record", "") != "judgment") {
      throw DataError("judgments file has a malformed record: " + path);
    }
    judgments.push_back({j.at("instance_id").get<std::uint64_t>(),
                         j.at("step").get<int>(), j.at("candidate").get<int>(),
                         j.at("correct").get<bool>()});
  }
  return judgments;
}

}  // namespace srl
