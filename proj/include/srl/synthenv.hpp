#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srl/common.hpp"

namespace srl {

// Marginal target distributions for the categorical tags. Vector length
// defines the number of categories on each axis; label must have 4 entries.
struct TagDistribution {
  std::vector<double> domain{0.25, 0.25, 0.25, 0.25};
  std::vector<double> query_type{0.25, 0.25, 0.25, 0.25};
  std::vector<double> label{0.25, 0.25, 0.25, 0.25};
};

// Shape of the feature mixture. Per-instance noise sigma is drawn from
// [min_sigma, max_sigma], tiered by query_type so difficulty correlates with
// that tag. The category block gets category_noise_scale * sigma; each of the
// attribute_width attribute coordinates carries a weak +-attribute_signal,
// so the attribute is recoverable only by pooling the whole block.
struct NoiseModel {
  double min_sigma = 0.05;
  double max_sigma = 0.45;
  double category_noise_scale = 0.5;
  double attribute_signal = 0.12;
  int attribute_width = 10;
};

struct GeneratorSpec {
  std::size_t n = 0;
  int feature_dim = 26;
  int query_classes = 4;
  int item_classes = 4;
  std::uint64_t seed = 1;
  double deceptive_fraction = 0.0;
  TagDistribution tags;
  NoiseModel noise;
};

struct InstanceTags {
  int domain = 0;
  int query_type = 0;
  int label = 1;  // always equals gt_grade
};

struct Instance {
  std::uint64_t id = 0;
  std::vector<double> features;
  int gt_query_class = 0;
  int gt_item_class = 0;
  bool gt_category_match = false;
  bool gt_attribute_match = false;
  int gt_grade = 1;
  bool deceptive = false;
  InstanceTags tags;
};

struct Dataset {
  GeneratorSpec spec;
  std::vector<Instance> instances;
};

// Coordinate blocks inside the feature vector, in order: noisy one-hot of the
// query class, of the item class, of the category match, then the diffuse
// attribute block, then pure-noise padding.
struct FeatureLayout {
  Span query_block;
  Span item_block;
  Span category_block;
  Span attribute_block;
  Span noise_block;
};

FeatureLayout feature_layout(const GeneratorSpec& spec);

// (true,true)->4, (true,false)->3, (false,true)->2, (false,false)->1.
int grade_rule(bool category_match, bool attribute_match);

// Throws ConfigError when dimensions or distributions are invalid.
void validate(const GeneratorSpec& spec);

// Deterministic for a fixed spec (including seed).
Dataset generate_dataset(const GeneratorSpec& spec);

// Line-delimited UTF-8 records: one header line carrying the GeneratorSpec
// and provenance, then one instance per line with fixed field order.
void save_dataset(const Dataset& dataset, const std::string& path,
                  const std::string& config_hash, std::uint64_t seed);
Dataset load_dataset(const std::string& path);

}  // namespace srl
