#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bridge/dag.hpp"
#include "bridge/task.hpp"

namespace bridge {

// ---- query ----------------------------------------------------------------

// Nodes that carry an explicit premise sentence: iGSM instance nodes (abstract
// nodes are implicit), every node for PromptBench.
std::vector<NodeId> premise_nodes(const Dag& dag, Family family);

// Throws TemplateError for expression forms the family has no template for.
std::string render_premise(const Dag& dag, NodeId id, Family family);
std::string render_question(const Dag& dag, Family family);

// Premises in a seeded random order, question last.
std::vector<std::string> render_query(const Dag& dag, Family family, std::uint64_t seed);
std::vector<std::string> render_query_ordered(const Dag& dag, Family family,
                                              const std::vector<NodeId>& premise_order);

// ---- chain of thought -----------------------------------------------------

inline constexpr int kIgsmConstLeads = 2;
inline constexpr int kIgsmComputeLeads = 5;

// Vanilla CoT over `order`, which must be a linear extension of exactly the
// non-redundant nodes. iGSM aliases are drawn without replacement from the 52
// ASCII letters; lead-ins rotate through the template pool with seeded jitter.
std::vector<CotStep> render_cot(const Dag& dag, const std::vector<NodeId>& order, Family family,
                                std::uint64_t seed);

// One vanilla compute step (no behaviors). `alias_of` maps every node to its
// alias; refs of `id` must already have one.
CotStep make_compute_step(const Dag& dag, NodeId id, Family family,
                          const std::vector<std::string>& alias_of, int lead);

// "We know that it equals ..." (iGSM) / "since ..." (PromptBench) without
// trailing punctuation handling; used by information analysis.
std::string analysis_text(const Dag& dag, NodeId id, Family family);

std::string render_step(const Dag& dag, const CotStep& step, Family family);
// Header line, one line per step, final "Thus, the answer is N." line.
std::vector<std::string> render_answer_lines(const Task& task);
std::string render_answer(const Task& task);
std::string render_query_text(const Task& task);

// ---- SFT / scoring --------------------------------------------------------

extern const std::string_view kSystemPrompt;

// template_family: "qwen" (ChatML markers), "llama", or "plain".
std::string render_sft_record(const Task& task, std::string_view template_family);

struct ModelOutput {
  std::optional<std::int64_t> final_answer;
  bool format_ok = false;
};

ModelOutput parse_model_output(std::string_view text);

// ---- extraction -----------------------------------------------------------

// Rebuilds the Dag from query and answer text by string matching. Injected
// behavior sentences are ignored. iGSM abstract nodes get their members from
// the answer when solved there, otherwise from `categories`.
// Throws ExtractError naming the offending sentence.
Dag extract_dag(std::string_view query, std::string_view answer, Family family,
                const CategoryTable* categories = nullptr);
Dag extract_dag(const Task& task);

}  // namespace bridge
