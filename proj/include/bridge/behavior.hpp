#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bridge/rng.hpp"
#include "bridge/task.hpp"

namespace bridge {

struct InjectConfig {
  double p = 0.1;
  // Subgoal expansion on every multi-operation chain; otherwise with prob p.
  bool subgoal_always = true;
  std::optional<std::size_t> max_reflections;  // per CoT, unlimited by default
  std::uint64_t seed = 0;
};

// Expands "13 + 5 + 6 = 24" into "13 + 5 + 6 = 18 + 6 = 24". With `rng`
// null every eligible step is expanded; otherwise each with probability p.
std::vector<CotStep> inject_subgoals(const std::vector<CotStep>& cot, const Dag& dag,
                                     Rng* rng = nullptr, double p = 1.0);

std::vector<CotStep> inject_analysis(const std::vector<CotStep>& cot, const Dag& dag, double p,
                                     Rng& rng);

// Nodes that may be attempted right now: needed, unsolved, not already
// pending, with at least one solved and at least one unsolved reference.
std::vector<NodeId> reflection_candidates(const Dag& dag, const std::set<NodeId>& solved,
                                          const std::set<NodeId>& pending);

// At each boundary after a compute step, with probability p, attempts a
// uniformly chosen candidate; its later compute step becomes a resolve step.
std::vector<CotStep> inject_reflection(const std::vector<CotStep>& cot, const Dag& dag, double p,
                                       Rng& rng, std::optional<std::size_t> max_reflections = {});

// Subgoals, then analysis, then reflection. Records the manifest in meta.
Task bridge_augment(const Task& task, const InjectConfig& config);

// Copies with independently permuted premises (question stays last).
std::vector<Task> pp_aug(const Task& task, std::size_t copies, std::uint64_t seed);
// Copies with CoTs re-rendered over fresh random linear extensions.
std::vector<Task> rc_aug(const Task& task, std::size_t copies, std::uint64_t seed);

// query id -> (n_correct, N); keeps 1 <= n_correct <= N - 1.
// Throws std::invalid_argument when some N < 2 or n_correct is out of range.
std::set<std::string> rejection_filter(const std::map<std::string, std::pair<int, int>>& counts);

// Reason the CoT is invalid, or nullopt when it verifies.
std::optional<std::string> cot_problem(const Task& task);
bool verify_cot(const Task& task);

// Fills task.meta.behaviors from the per-step behavior sets.
void record_behaviors(Task& task);

}  // namespace bridge
