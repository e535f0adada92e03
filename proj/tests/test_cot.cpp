#include <gtest/gtest.h>

#include <algorithm>

#include "bridge/arith.hpp"
#include "bridge/behavior.hpp"
#include "bridge/cot.hpp"
#include "bridge/errors.hpp"
#include "bridge/igsm.hpp"
#include "bridge/worked_examples.hpp"
#include "bridge/promptbench.hpp"
#include "helpers.hpp"

using namespace bridge;

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

bool contains_text(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

// Sorted (parent name, child name) pairs.
std::vector<std::pair<std::string, std::string>> named_edges(const Dag& d) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto [u, v] : edges(d)) out.emplace_back(d.at(u).name, d.at(v).name);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

TEST(Arith, EvaluateGrammar) {
  EXPECT_EQ(arith::evaluate("13 + 5 + 6").value, 24);
  EXPECT_EQ(arith::evaluate("13 + 5 + 6").binary_ops, 2);
  EXPECT_EQ(arith::evaluate("2 + 3 * 4").value, 14);
  EXPECT_EQ(arith::evaluate("9^2").value, 81);
  EXPECT_EQ(arith::evaluate("5 - (-3)").value, 8);
  EXPECT_EQ(arith::evaluate("-24").value, -24);
  const arith::Lookup lk = [](std::string_view s) -> std::optional<std::int64_t> {
    if (s == "S") return 1;
    return std::nullopt;
  };
  EXPECT_EQ(arith::evaluate("5 * S", lk).value, 5);
  EXPECT_THROW(arith::evaluate("5 * T", lk), FormatError);
  EXPECT_THROW(arith::evaluate("5 +"), FormatError);
}

TEST(Arith, FoldLeft) {
  EXPECT_EQ(arith::fold_left_steps("13 + 5 + 6"), (std::vector<std::string>{"18 + 6", "24"}));
  EXPECT_EQ(arith::fold_left_steps("1 + 2 + 3 + 4"), (std::vector<std::string>{"3 + 3 + 4", "6 + 4", "10"}));
  EXPECT_EQ(arith::fold_left_steps("3 - 5 + 1"), (std::vector<std::string>{"(-2) + 1", "-1"}));
  EXPECT_EQ(arith::fold_left_steps("7 * 2"), (std::vector<std::string>{"14"}));
}

TEST(RenderQuery, IgsmPremiseTemplates) {
  const Task t = igsm_worked_task();
  EXPECT_EQ(t.query.size(), 14u);
  EXPECT_TRUE(contains(t.query, "The number of each Pottery Classroom's Printed Casual Backpack equals 1."));
  EXPECT_TRUE(contains(t.query,
                       "The number of each Graphic Design Studio's Manager Backpack equals the difference of each "
                       "Rising Stars Junior High's Classroom and each Oakwood Middle School's Classroom."));
  EXPECT_EQ(t.query.back(), "How many Manager Backpack does each Graphic Design Studio have?");
}

TEST(RenderQuery, PromptBenchTemplates) {
  const Task t = pb_worked_task();
  EXPECT_EQ(t.query.size(), 21u);
  EXPECT_TRUE(contains(t.query, "aab gets its value by squaring the value that aaa has."));
  EXPECT_EQ(t.query.back(), "What is the value of aap?");
}

TEST(RenderQuery, SeedPermutesPremisesOnly) {
  const Dag d = igsm_worked_task().dag;
  const auto a = render_query(d, Family::igsm, 1);
  const auto b = render_query(d, Family::igsm, 2);
  EXPECT_NE(a, b);
  EXPECT_EQ(a.back(), b.back());
  EXPECT_TRUE(std::is_permutation(a.begin(), a.end(), b.begin()));
}

TEST(RenderQuery, SinglePremisePbTask) {
  PbConfig c;
  c.depth = 1;
  const Task t = generate_pb(c, 3);
  EXPECT_EQ(t.query.size(), 2u);
  EXPECT_EQ(t.cot.size(), 1u);
}

TEST(RenderCot, WorkedExampleLines) {
  const std::string igsm = render_answer(igsm_worked_task());
  EXPECT_TRUE(contains_text(igsm, "Then Q = 5 * S = 5 * 1 = 5."));
  EXPECT_TRUE(contains_text(igsm, "Thus, the answer is 24."));
  const std::string pb = render_answer(pb_worked_task());
  EXPECT_TRUE(contains_text(pb, "Let's solve aab, aab = aaa^2 = 81"));
  EXPECT_TRUE(contains_text(pb, "aai = aag * aah = 12"));
  EXPECT_TRUE(contains_text(pb, "aap = aaf - aao = 55"));
}

TEST(RenderCot, BridgeFixtureLines) {
  const std::string a = render_answer(igsm_worked_bridge_task());
  EXPECT_TRUE(contains_text(a, "= 13 + 5 + 6 = 18 + 6 = 24"));
  EXPECT_TRUE(contains_text(a, "the value of y is still unknown"));
  EXPECT_TRUE(contains_text(a, "Remember that it has been denoted as y"));
  EXPECT_TRUE(contains_text(a, "We know that it equals the difference between each Rising Stars Junior High's "
                               "Classroom and each Oakwood Middle School's Classroom."));
}

TEST(RenderCot, SingleConstTask) {
  using namespace expr;
  Task t;
  t.family = Family::promptbench;
  t.dag = classify_roles(with_values(test::make_dag({{"aaa", Const{4}}}, 0)));
  t.cot = render_cot(t.dag, solution_order(t.dag), t.family, 0);
  t.gold = 4;
  t.query = render_query(t.dag, t.family, 0);
  ASSERT_EQ(t.cot.size(), 1u);
  EXPECT_EQ(render_answer_lines(t).back(), "Thus, the answer is 4.");
  EXPECT_TRUE(verify_cot(t));
}

TEST(RenderCot, RejectsBadOrder) {
  const Dag d = test::chain_abc();
  EXPECT_ANY_THROW(render_cot(d, {1, 0, 2}, Family::promptbench, 0));
}

TEST(RenderCot, EveryLinkReevaluates) {
  IgsmConfig c;
  const IgsmWorld w = default_igsm_world();
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Task t = bridge_augment(generate_igsm(c, w, s), {0.5, true, {}, s});
    for (const CotStep& step : t.cot) {
      if (step.kind != StepKind::compute) continue;
      for (std::size_t i = 1; i < step.equation_chain.size(); ++i) {
        EXPECT_EQ(arith::evaluate(step.equation_chain[i]).value, t.dag.at(step.node).value);
      }
    }
  }
}

TEST(Extract, IgsmFig6Topology) {
  const Task t = igsm_worked_task();
  const Dag d = extract_dag(t);
  std::string why;
  EXPECT_TRUE(same_structure(d, t.dag, &why)) << why;
  EXPECT_EQ(named_edges(d), named_edges(t.dag));
  std::size_t premises = 0;
  for (const Node& n : d.nodes) premises += n.layer == LayerTag::instance;
  EXPECT_EQ(premises, 13u);
  EXPECT_EQ(d.at(d.target).value, 24);
}

TEST(Extract, PromptBenchFig7Topology) {
  const Task t = pb_worked_task();
  const Dag d = extract_dag(t);
  std::string why;
  EXPECT_TRUE(same_structure(d, t.dag, &why)) << why;
  EXPECT_EQ(named_edges(d), named_edges(t.dag));
  EXPECT_EQ(d.size(), 20u);  // the example skips aal and aam
}

TEST(Extract, IgnoresInjectedBehaviors) {
  const Task b = igsm_worked_bridge_task();
  std::string why;
  EXPECT_TRUE(same_structure(extract_dag(b), igsm_worked_task().dag, &why)) << why;
}

TEST(Extract, SingleConstantPremise) {
  const Dag d = extract_dag("The value of aaa is 7. What is the value of aaa?", "Thus, the answer is 7.", Family::promptbench);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.at(0).value, 7);
}

TEST(Extract, BadSentenceNamesIt) {
  try {
    extract_dag("The value of aaa is 7. aab is sort of big. What is the value of aab?", "", Family::promptbench);
    FAIL() << "expected ExtractError";
  } catch (const ExtractError& e) {
    EXPECT_TRUE(contains_text(e.what(), "aab is sort of big"));
  }
}

TEST(Extract, PremisePermutationInvariant) {
  const Task t = igsm_worked_task();
  const Dag base = extract_dag(t);
  for (std::uint64_t s = 0; s < 10; ++s) {
    Task u = t;
    u.query = render_query(t.dag, t.family, s);
    EXPECT_TRUE(same_structure(extract_dag(u), base));
  }
}

TEST(Extract, RoundTripGenerated) {
  IgsmConfig ic;
  const IgsmWorld w = default_igsm_world();
  PbConfig pc;
  pc.redundancy_range = {0, 4};
  for (std::uint64_t s = 0; s < 100; ++s) {
    for (const Task& t : {generate_igsm(ic, w, s), generate_pb(pc, s)}) {
      std::string why;
      EXPECT_TRUE(same_structure(extract_dag(t), t.dag, &why)) << t.id << ": " << why;
    }
  }
}

TEST(Sft, SystemPromptAndAnswerTags) {
  const Task t = igsm_worked_task();
  for (const char* fam : {"qwen", "llama", "plain"}) {
    const std::string r = render_sft_record(t, fam);
    EXPECT_TRUE(contains_text(r, "The reasoning process and answer are enclosed within <think> </think> and "
                                 "<answer> </answer> tags"));
    EXPECT_TRUE(contains_text(r, "\\boxed{24} </answer>"));
  }
  const std::string q = render_sft_record(t, "qwen");
  EXPECT_TRUE(q.ends_with("\\boxed{24} </answer>"));
  EXPECT_TRUE(contains_text(q, "<|im_start|>assistant<|im_end|>\n<think> "));
  EXPECT_THROW(render_sft_record(t, "nope"), std::invalid_argument);
}

TEST(Sft, RecordParsesBackToGold) {
  const Task t = pb_worked_task();
  const std::string r = render_sft_record(t, "qwen");
  const std::string assistant = r.substr(r.rfind("<|im_end|>\n") + 11);
  const ModelOutput m = parse_model_output(assistant);
  EXPECT_TRUE(m.format_ok);
  ASSERT_TRUE(m.final_answer);
  EXPECT_EQ(*m.final_answer, 55);
}

TEST(Sft, EmptyCotStillWellFormed) {
  Task t = pb_worked_task();
  t.cot.clear();
  const std::string r = render_sft_record(t, "plain");
  const ModelOutput m = parse_model_output(r.substr(r.rfind("Assistant: ") + 11));
  EXPECT_TRUE(m.format_ok);
  EXPECT_EQ(m.final_answer, 55);
}

TEST(ParseOutput, Cases) {
  auto m = parse_model_output("<think>x</think> <answer> The final answer is \\boxed{24} </answer>");
  EXPECT_TRUE(m.format_ok);
  EXPECT_EQ(m.final_answer, 24);

  m = parse_model_output("<think>x</think> <answer> The final answer is \\boxed{24}");
  EXPECT_FALSE(m.format_ok);
  EXPECT_EQ(m.final_answer, 24);

  m = parse_model_output("<think>x</think> <answer> \\boxed{2.5} </answer>");
  EXPECT_TRUE(m.format_ok);
  EXPECT_FALSE(m.final_answer);

  m = parse_model_output("<think>x</think> <answer> \\boxed{1} then \\boxed{-7} </answer>");
  EXPECT_EQ(m.final_answer, -7);

  m = parse_model_output("the answer is 24");
  EXPECT_FALSE(m.format_ok);
  EXPECT_FALSE(m.final_answer);
}
