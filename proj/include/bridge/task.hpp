#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "bridge/dag.hpp"

namespace bridge {

// Inclusive integer interval.
struct Range {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  bool contains(std::int64_t v) const { return lo <= v && v <= hi; }
  bool empty() const { return lo > hi; }
  bool operator==(const Range&) const = default;
};

enum class Family { igsm, promptbench };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

enum class Behavior { subgoal, analysis, reflection_attempt, reflection_resolve };

std::string_view to_string(Behavior b);
Behavior behavior_from_string(std::string_view s);

enum class StepKind { compute, attempt };

struct CotStep {
  NodeId node = 0;
  // Single letter for iGSM, the node name itself for PromptBench.
  std::string alias;
  StepKind kind = StepKind::compute;
  // Index into the family's lead-in template pool.
  int lead = 0;
  // Compute steps: symbolic form, numeric substitution, reductions, value.
  // Consecutive duplicates are dropped, so "p = B = 48" is {"B", "48"}.
  std::vector<std::string> equation_chain;
  // Attempt steps: the unsolved dependency that blocks the node.
  std::optional<NodeId> missing;
  std::set<Behavior> behaviors;

  bool operator==(const CotStep&) const = default;
};

// Category name -> instance names, in world order. Lets extract_dag recover
// the implicit members of iGSM abstract nodes.
using CategoryTable = std::vector<std::pair<std::string, std::vector<std::string>>>;

struct AppliedBehavior {
  Behavior behavior;
  std::size_t step;
  bool operator==(const AppliedBehavior&) const = default;
};

struct TaskMeta {
  std::optional<int> op_count;      // igsm
  std::optional<int> depth;         // promptbench
  std::optional<int> redundancy;    // promptbench (redundant subtrees)
  std::uint64_t seed = 0;
  std::vector<AppliedBehavior> behaviors;
  CategoryTable categories;         // igsm
  bool redundant_premises = false;  // query contains premises outside the solution
  std::string augmentation;         // "", "bridge", "pp", "rc"

  bool operator==(const TaskMeta&) const = default;
};

struct Task {
  std::string id;
  Family family = Family::igsm;
  // Premise sentences followed by the question sentence.
  std::vector<std::string> query;
  Dag dag;
  std::vector<CotStep> cot;
  std::int64_t gold = 0;
  TaskMeta meta;

  bool operator==(const Task&) const = default;
};

}  // namespace bridge
