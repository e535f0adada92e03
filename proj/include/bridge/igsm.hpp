#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bridge/task.hpp"

namespace bridge {

// Name pools. Containers sit on top; each category is one layer below the
// previous one, so an entity of layer L is an instance name of layer L-1.
// Node "E's X" is an instance node when X is an instance of the layer below
// E, an abstract node when X is that layer's category name.
struct IgsmWorld {
  std::vector<std::string> containers;
  CategoryTable categories;
};

// Schools -> Classroom -> Backpack, pools large enough for the defaults.
IgsmWorld default_igsm_world();

// Throws std::invalid_argument for empty pools, duplicate names, or names that
// would break the sentence grammar (".", ",", "'s ", " and ", " is ", " as ").
void validate_world(const IgsmWorld& world);

// One name per line; blank lines and lines starting with '#' are skipped.
std::vector<std::string> read_name_list(const std::string& path);

struct IgsmConfig {
  Range op_range{15, 20};
  Range answer_range{-1000, 1000};
  std::size_t max_regen_attempts = 2000;
  Range const_range{0, 9};
  Range addk_range{0, 9};
  Range scale_range{2, 9};
  int containers = 3;
  // Distinct instance names drawn per layer, and children per entity.
  int layer_width = 3;
  Range children_per_entity{2, 3};
  int max_refs = 3;
  double const_prob = 0.15;
  // Relative weights of AddK, Sum, Diff, Scale, Mul.
  std::vector<double> op_weights{0.35, 0.15, 0.25, 0.25, 0.0};
  // Off by default: only the final answer is range-filtered.
  std::optional<std::int64_t> intermediate_bound;
};

void validate_config(const IgsmConfig& config);

// Deterministic in (config, world, seed). Throws GenerationError once
// max_regen_attempts full resamples all fail the filters.
Task generate_igsm(const IgsmConfig& config, const IgsmWorld& world, std::uint64_t seed);

}  // namespace bridge
