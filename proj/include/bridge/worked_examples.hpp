#pragma once

#include "bridge/task.hpp"

namespace bridge {

// The two worked examples, built by hand: node expressions, premise order and
// CoT order/lead-ins exactly as printed.

// Oakwood / Rising Stars iGSM task, vanilla CoT, gold 24.
Task igsm_worked_task();
// Same task with the three injected behaviors of the combined example
// (subgoal on v, reflection attempt on y after v, analysis + resolve on y).
Task igsm_worked_bridge_task();
CategoryTable igsm_worked_categories();

// aaa..aav PromptBench task, depth 4, two redundant subtrees, gold 55.
Task pb_worked_task();

}  // namespace bridge
