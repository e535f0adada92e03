#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bridge/task.hpp"

namespace bridge {

enum class PbOp { add, sub, mul, square };

std::string_view to_string(PbOp op);
PbOp pb_op_from_string(std::string_view s);

struct PbConfig {
  int depth = 4;
  // Number of redundant subtrees hanging off nothing.
  Range redundancy_range{0, 0};
  std::vector<std::int64_t> leaf_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  Range answer_range{-1000, 1000};
  std::vector<PbOp> operators{PbOp::add, PbOp::sub, PbOp::mul, PbOp::square};
  int max_redundant_depth = 2;
  std::size_t max_regen_attempts = 2000;
};

void validate_config(const PbConfig& config);

// "aaa", "aab", ... (base 26, three letters). Throws past "zzz".
std::string pb_name(std::size_t index);

// Complete tree of the configured depth rooted at the target, plus redundant
// subtrees. Deterministic in (config, seed); throws GenerationError when the
// answer filter rejects max_regen_attempts draws.
Task generate_pb(const PbConfig& config, std::uint64_t seed);

}  // namespace bridge
