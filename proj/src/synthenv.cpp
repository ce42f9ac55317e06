#include "srl/synthenv.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "srl/rng.hpp"
#include "srl/textio.hpp"

namespace srl {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_distribution(const std::vector<double>& probs,
                        const std::string& name, std::size_t required = 0) {
  if (probs.empty()) {
    throw ConfigError("generator: tag distribution '" + name + "' is empty");
  }
  if (required != 0 && probs.size() != required) {
    throw ConfigError("generator: tag distribution '" + name + "' must have " +
                      std::to_string(required) + " entries");
  }
  double total = 0.0;
  for (double p : probs) {
    if (p < 0.0) {
      throw ConfigError("generator: tag distribution '" + name +
                        "' has a negative entry");
    }
    total += p;
  }
  if (!(total > 0.0)) {
    throw ConfigError("generator: tag distribution '" + name + "' sums to 0");
  }
}

}  // namespace

FeatureLayout feature_layout(const GeneratorSpec& spec) {
  FeatureLayout layout;
  std::size_t at = 0;
  layout.query_block = {at, at + static_cast<std::size_t>(spec.query_classes)};
  at = layout.query_block.end;
  layout.item_block = {at, at + static_cast<std::size_t>(spec.item_classes)};
  at = layout.item_block.end;
  layout.category_block = {at, at + 2};
  at = layout.category_block.end;
  layout.attribute_block = {
      at, at + static_cast<std::size_t>(spec.noise.attribute_width)};
  at = layout.attribute_block.end;
  layout.noise_block = {at, static_cast<std::size_t>(spec.feature_dim)};
  return layout;
}

int grade_rule(bool category_match, bool attribute_match) {
  if (category_match && attribute_match) return 4;
  if (category_match) return 3;
  if (attribute_match) return 2;
  return 1;
}

void validate(const GeneratorSpec& spec) {
  if (spec.n < 1) {
    throw ConfigError("generator: n must be >= 1");
  }
  if (spec.query_classes < 2 || spec.item_classes < 2) {
    throw ConfigError("generator: query_classes and item_classes must be >= 2");
  }
  if (spec.noise.attribute_width < 1) {
    throw ConfigError("generator: attribute_width must be >= 1");
  }
  int min_dim = spec.query_classes + spec.item_classes + 2 +
                spec.noise.attribute_width;
  if (spec.feature_dim < min_dim) {
    throw ConfigError("generator: feature_dim " +
                      std::to_string(spec.feature_dim) +
                      " too small for layout; need >= " +
                      std::to_string(min_dim));
  }
  if (spec.deceptive_fraction < 0.0 || spec.deceptive_fraction >= 1.0) {
    throw ConfigError("generator: deceptive_fraction must be in [0, 1)");
  }
  if (!(spec.noise.min_sigma >= 0.0) ||
      !(spec.noise.max_sigma >= spec.noise.min_sigma)) {
    throw ConfigError("generator: require 0 <= min_sigma <= max_sigma");
  }
  check_distribution(spec.tags.domain, "domain");
  check_distribution(spec.tags.query_type, "query_type");
  check_distribution(spec.tags.label, "label", kNumGrades);
}

Dataset generate_dataset(const GeneratorSpec& spec) {
  validate(spec);
  FeatureLayout layout = feature_layout(spec);

  Dataset dataset;
  dataset.spec = spec;
  dataset.instances.reserve(spec.n);

  int num_query_types = static_cast<int>(spec.tags.query_type.size());

  for (std::size_t index = 0; index < spec.n; ++index) {
    Rng rng(derive_seed(spec.seed, index, 0x647367ULL));
    Instance inst;
    inst.id = index;

    inst.tags.domain = rng.categorical(spec.tags.domain);
    inst.tags.query_type = rng.categorical(spec.tags.query_type);
    inst.gt_grade = rng.categorical(spec.tags.label) + 1;
    inst.tags.label = inst.gt_grade;

    // Deceptive instances draw their match booleans from a different grade,
    // so the recorded grade no longer follows from the rule.
    int structural_grade = inst.gt_grade;
    if (spec.deceptive_fraction > 0.0 &&
        rng.uniform() < spec.deceptive_fraction) {
      inst.deceptive = true;
      int offset = 1 + static_cast<int>(rng.uniform_index(kNumGrades - 1));
      structural_grade = ((inst.gt_grade - 1 + offset) % kNumGrades) + 1;
    }
    inst.gt_category_match = structural_grade >= 3;
    inst.gt_attribute_match = (structural_grade % 2) == 0;

    inst.gt_query_class = static_cast<int>(
        rng.uniform_index(static_cast<std::size_t>(spec.query_classes)));
    inst.gt_item_class = static_cast<int>(
        rng.uniform_index(static_cast<std::size_t>(spec.item_classes)));

    // Difficulty tier: sigma grows with the query_type index plus jitter.
    double tier = (static_cast<double>(inst.tags.query_type) + rng.uniform()) /
                  static_cast<double>(num_query_types);
    double sigma =
        spec.noise.min_sigma + (spec.noise.max_sigma - spec.noise.min_sigma) * tier;

    inst.features.assign(static_cast<std::size_t>(spec.feature_dim), 0.0);
    for (std::size_t i = layout.query_block.begin; i < layout.query_block.end;
         ++i) {
      double signal =
          (i - layout.query_block.begin ==
           static_cast<std::size_t>(inst.gt_query_class))
              ? 1.0
              : 0.0;
      inst.features[i] = signal + sigma * rng.normal();
    }
    for (std::size_t i = layout.item_block.begin; i < layout.item_block.end;
         ++i) {
      double signal = (i - layout.item_block.begin ==
                       static_cast<std::size_t>(inst.gt_item_class))
                          ? 1.0
                          : 0.0;
      inst.features[i] = signal + sigma * rng.normal();
    }
    double category_sigma = sigma * spec.noise.category_noise_scale;
    for (std::size_t i = layout.category_block.begin;
         i < layout.category_block.end; ++i) {
      std::size_t slot = i - layout.category_block.begin;
      double signal = (slot == (inst.gt_category_match ? 1u : 0u)) ? 1.0 : 0.0;
      inst.features[i] = signal + category_sigma * rng.normal();
    }
    double attr_sign = inst.gt_attribute_match ? 1.0 : -1.0;
    for (std::size_t i = layout.attribute_block.begin;
         i < layout.attribute_block.end; ++i) {
      inst.features[i] =
          attr_sign * spec.noise.attribute_signal + sigma * rng.normal();
    }
    for (std::size_t i = layout.noise_block.begin; i < layout.noise_block.end;
         ++i) {
      inst.features[i] = rng.normal();
    }

    dataset.instances.push_back(std::move(inst));
  }
  return dataset;
}

namespace {

ordered_json spec_to_json(const GeneratorSpec& spec) {
  ordered_json j;
  j["n"] = spec.n;
  j["feature_dim"] = spec.feature_dim;
  j["query_classes"] = spec.query_classes;
  j["item_classes"] = spec.item_classes;
  j["seed"] = spec.seed;
  j["deceptive_fraction"] = spec.deceptive_fraction;
  j["tag_distribution"] = {{"domain", spec.tags.domain},
                           {"query_type", spec.tags.query_type},
                           {"label", spec.tags.label}};
  j["noise"] = {{"min_sigma", spec.noise.min_sigma},
                {"max_sigma", spec.noise.max_sigma},
                {"category_noise_scale", spec.noise.category_noise_scale},
                {"attribute_signal", spec.noise.attribute_signal},
                {"attribute_width", spec.noise.attribute_width}};
  return j;
}

GeneratorSpec spec_from_json(const nlohmann::json& j) {
  GeneratorSpec spec;
  spec.n = j.at("n").get<std::size_t>();
  spec.feature_dim = j.at("feature_dim").get<int>();
  spec.query_classes = j.at("query_classes").get<int>();
  spec.item_classes = j.at("item_classes").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.deceptive_fraction = j.at("deceptive_fraction").get<double>();
  const auto& tags = j.at("tag_distribution");
  spec.tags.domain = tags.at("domain").get<std::vector<double>>();
  spec.tags.query_type = tags.at("query_type").get<std::vector<double>>();
  spec.tags.label = tags.at("label").get<std::vector<double>>();
  const auto& noise = j.at("noise");
  spec.noise.min_sigma = noise.at("min_sigma").get<double>();
  spec.noise.max_sigma = noise.at("max_sigma").get<double>();
  spec.noise.category_noise_scale =
      noise.at("category_noise_scale").get<double>();
  spec.noise.attribute_signal = noise.at("attribute_signal").get<double>();
  spec.noise.attribute_width = noise.at("attribute_width").get<int>();
  return spec;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path,
                  const std::string& config_hash, std::uint64_t seed) {
  std::ostringstream out;
  ordered_json header;
  header["record"] = "header";
  header["format_version"] = 1;
  header["config_hash"] = config_hash;
  header["seed"] = seed;
  header["generator_spec"] = spec_to_json(dataset.spec);
  out << header.dump() << '\n';

  for (const Instance& inst : dataset.instances) {
    ordered_json j;
    j["record"] = "instance";
    j["id"] = inst.id;
    j["features"] = inst.features;
    j["gt_query_class"] = inst.gt_query_class;
    j["gt_item_class"] = inst.gt_item_class;
    j["gt_category_match"] = inst.gt_category_match;
    j["gt_attribute_match"] = inst.gt_attribute_match;
    j["gt_grade"] = inst.gt_grade;
    j["deceptive"] = inst.deceptive;
    j["tags"] = {{"domain", inst.tags.domain},
                 {"query_type", inst.tags.query_type},
                 {"label", inst.tags.label}};
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("dataset file not found: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("dataset file is empty: " + path);
  }
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("record", "") != "header") {
    throw DataError("dataset file missing header record: " + path);
  }

  Dataset dataset;
  dataset.spec = spec_from_json(header.at("generator_spec"));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("record", "") != "instance") {
      throw DataError("dataset file has a malformed instance record: " + path);
    }
    Instance inst;
    inst.id = j.at("id").get<std::uint64_t>();
    inst.features = j.at("features").get<std::vector<double>>();
    inst.gt_query_class = j.at("gt_query_class").get<int>();
    inst.gt_item_class = j.at("gt_item_class").get<int>();
    inst.gt_category_match = j.at("gt_category_match").get<bool>();
    inst.gt_attribute_match = j.at("gt_attribute_match").get<bool>();
    inst.gt_grade = j.at("gt_grade").get<int>();
    inst.deceptive = j.at("deceptive").get<bool>();
    inst.tags.domain = j.at("tags").at("domain").get<int>();
    inst.tags.query_type = j.at("tags").at("query_type").get<int>();
    inst.tags.label = j.at("tags").at("label").get<int>();
    dataset.instances.push_back(std::move(inst));
  }
  return dataset;
}

}  // namespace srl
