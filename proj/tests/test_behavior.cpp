#include <gtest/gtest.h>

#include <algorithm>

#include "bridge/arith.hpp"
#include "bridge/behavior.hpp"
#include "bridge/cot.hpp"
#include "bridge/igsm.hpp"
#include "bridge/worked_examples.hpp"
#include "bridge/promptbench.hpp"
#include "helpers.hpp"

using namespace bridge;

namespace {

std::size_t count_behavior(const std::vector<CotStep>& cot, Behavior b) {
  return std::count_if(cot.begin(), cot.end(), [&](const CotStep& s) { return s.behaviors.count(b) > 0; });
}

std::size_t compute_steps(const std::vector<CotStep>& cot) {
  return std::count_if(cot.begin(), cot.end(), [](const CotStep& s) { return s.kind == StepKind::compute; });
}

// Each numeric link removes at most one operator.
bool single_op_links(const CotStep& s) {
  for (std::size_t i = 1; i + 1 < s.equation_chain.size(); ++i) {
    if (arith::evaluate(s.equation_chain[i]).binary_ops - arith::evaluate(s.equation_chain[i + 1]).binary_ops > 1) {
      return false;
    }
  }
  return true;
}

Task vanilla_with_sum(const std::vector<std::int64_t>& ks) {
  std::vector<std::pair<std::string, Expr>> specs;
  std::vector<NodeId> refs;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    specs.emplace_back(pb_name(i), expr::Const{ks[i]});
    refs.push_back(static_cast<NodeId>(i));
  }
  specs.emplace_back("sum", expr::Sum{refs});
  Task t;
  t.id = "sum";
  t.family = Family::igsm;
  t.dag = classify_roles(with_values(test::make_dag(specs, static_cast<NodeId>(ks.size()))));
  return t;
}

std::vector<Task> corpus(std::size_t n) {
  std::vector<Task> out;
  const IgsmWorld w = default_igsm_world();
  PbConfig pc;
  pc.redundancy_range = {0, 4};
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(i % 2 ? generate_pb(pc, i) : generate_igsm(IgsmConfig{}, w, i));
  }
  return out;
}

}  // namespace

TEST(Subgoal, WorkedExampleChain) {
  const Task t = igsm_worked_task();
  const auto cot = inject_subgoals(t.cot, t.dag);
  const CotStep& v = cot[5];
  EXPECT_EQ(v.equation_chain, (std::vector<std::string>{"m + Q + W", "13 + 5 + 6", "18 + 6", "24"}));
  EXPECT_TRUE(v.behaviors.count(Behavior::subgoal));
  EXPECT_EQ(cot[1], t.cot[1]);  // single-op chain unchanged
  EXPECT_EQ(inject_subgoals(cot, t.dag), cot);
}

TEST(Subgoal, FourTermSum) {
  const std::vector<std::int64_t> ks = {1, 2, 3, 4};
  Task t = vanilla_with_sum(ks);
  t.cot = render_cot(t.dag, solution_order(t.dag), Family::igsm, 0);
  const auto cot = inject_subgoals(t.cot, t.dag);
  const auto& chain = cot.back().equation_chain;
  ASSERT_GE(chain.size(), 4u);
  EXPECT_EQ(std::vector<std::string>(chain.end() - 4, chain.end()),
            (std::vector<std::string>{"1 + 2 + 3 + 4", "3 + 3 + 4", "6 + 4", "10"}));
}

TEST(Subgoal, NormalFormOnCorpus) {
  for (const Task& t : corpus(100)) {
    const auto cot = inject_subgoals(t.cot, t.dag);
    for (const CotStep& s : cot) EXPECT_TRUE(single_op_links(s)) << t.id;
    for (std::size_t i = 0; i < cot.size(); ++i) {
      EXPECT_EQ(cot[i].equation_chain.back(), t.cot[i].equation_chain.back());
    }
  }
}

TEST(Analysis, WorkedExampleSentence) {
  const Task t = igsm_worked_task();
  Rng rng(1);
  Task a = t;
  a.cot = inject_analysis(t.cot, t.dag, 1.0, rng);
  const std::string text = render_answer(a);
  EXPECT_NE(text.find("We know that it equals the difference between each Rising Stars Junior High's Classroom "
                      "and each Oakwood Middle School's Classroom."),
            std::string::npos);
}

TEST(Analysis, ProbabilityEndpoints) {
  for (const Task& t : corpus(20)) {
    Rng r0(3), r1(3);
    EXPECT_EQ(inject_analysis(t.cot, t.dag, 0.0, r0), t.cot);
    const auto all = inject_analysis(t.cot, t.dag, 1.0, r1);
    EXPECT_EQ(count_behavior(all, Behavior::analysis), compute_steps(t.cot));
  }
}

TEST(Reflection, CandidatesOnWorkedExample) {
  const Dag d = igsm_worked_task().dag;
  const std::set<NodeId> solved = {0, 1, 2, 3, 4, 5};  // through v
  const auto c = reflection_candidates(d, solved, {});
  EXPECT_TRUE(std::count(c.begin(), c.end(), NodeId{8}));
  EXPECT_TRUE(locked_nodes(d, solved).count(8));
}

TEST(Reflection, WorkedExampleAttemptNamesMissingDependency) {
  const Task t = igsm_worked_bridge_task();
  const auto it = std::find_if(t.cot.begin(), t.cot.end(), [](const CotStep& s) { return s.kind == StepKind::attempt; });
  ASSERT_NE(it, t.cot.end());
  EXPECT_EQ(t.dag.at(it->node).name, "Graphic Design Studio's Manager Backpack");
  EXPECT_EQ(t.dag.at(*it->missing).name, "Rising Stars Junior High's Classroom");
  EXPECT_TRUE(verify_cot(t));
}

TEST(Reflection, ZeroProbabilityIsIdentity) {
  for (const Task& t : corpus(20)) {
    Rng rng(9);
    EXPECT_EQ(inject_reflection(t.cot, t.dag, 0.0, rng), t.cot);
  }
}

TEST(Reflection, AttemptsTargetLockedNodes) {
  for (const Task& t : corpus(200)) {
    Rng rng(t.meta.seed);
    const auto cot = inject_reflection(t.cot, t.dag, 0.5, rng);
    std::set<NodeId> solved;
    std::set<NodeId> pending;
    for (const CotStep& s : cot) {
      if (s.kind == StepKind::attempt) {
        EXPECT_TRUE(locked_nodes(t.dag, solved).count(s.node)) << t.id;
        ASSERT_TRUE(s.missing);
        EXPECT_FALSE(solved.count(*s.missing));
        const auto refs = expr_refs(t.dag.at(s.node).expr);
        EXPECT_TRUE(std::count(refs.begin(), refs.end(), *s.missing));
        EXPECT_TRUE(std::any_of(refs.begin(), refs.end(), [&](NodeId r) { return solved.count(r) > 0; }));
        pending.insert(s.node);
      } else {
        EXPECT_EQ(s.behaviors.count(Behavior::reflection_resolve) > 0, pending.count(s.node) > 0);
        pending.erase(s.node);
        solved.insert(s.node);
      }
    }
    EXPECT_TRUE(pending.empty());
  }
}

TEST(Reflection, CapLimitsAttempts) {
  for (const Task& t : corpus(30)) {
    Rng rng(4);
    const auto cot = inject_reflection(t.cot, t.dag, 1.0, rng, 1);
    EXPECT_LE(count_behavior(cot, Behavior::reflection_attempt), 1u);
  }
}

TEST(Bridge, IdentityWithoutBehaviors) {
  for (const Task& t : corpus(20)) {
    const Task b = bridge_augment(t, {0.0, false, {}, 1});
    EXPECT_EQ(b.cot, t.cot);
    EXPECT_EQ(b.gold, t.gold);
    EXPECT_EQ(b.query, t.query);
  }
}

TEST(Bridge, VerifiesAndPreservesAnswers) {
  for (const Task& t : corpus(300)) {
    const Task b = bridge_augment(t, {0.3, true, {}, t.meta.seed});
    EXPECT_EQ(cot_problem(b).value_or(""), "") << t.id;
    EXPECT_EQ(b.gold, t.gold);
    EXPECT_EQ(b.meta.augmentation, b.cot != t.cot ? "bridge" : "");
    const Dag d = extract_dag(b);
    EXPECT_TRUE(same_structure(d, extract_dag(t))) << t.id;
    for (const AppliedBehavior& ab : b.meta.behaviors) {
      ASSERT_LT(ab.step, b.cot.size());
      EXPECT_TRUE(b.cot[ab.step].behaviors.count(ab.behavior));
    }
  }
}

TEST(Bridge, WorkedExampleHitsAllBehaviors) {
  const Task t = igsm_worked_task();
  bool found = false;
  for (std::uint64_t s = 0; s < 200 && !found; ++s) {
    const Task b = bridge_augment(t, {0.5, true, {}, s});
    found = count_behavior(b.cot, Behavior::subgoal) && count_behavior(b.cot, Behavior::analysis) &&
            count_behavior(b.cot, Behavior::reflection_attempt) && count_behavior(b.cot, Behavior::reflection_resolve);
    if (found) EXPECT_TRUE(verify_cot(b));
  }
  EXPECT_TRUE(found);
}

TEST(Bridge, AnalysisRateCalibrated) {
  std::size_t steps = 0, hits = 0;
  for (const Task& t : corpus(400)) {
    const Task b = bridge_augment(t, {0.1, true, {}, t.meta.seed + 11});
    steps += compute_steps(b.cot);
    hits += count_behavior(b.cot, Behavior::analysis);
  }
  ASSERT_GE(steps, 4000u);
  const double rate = static_cast<double>(hits) / static_cast<double>(steps);
  EXPECT_NEAR(rate, 0.1, 0.02);
}

TEST(PpAug, ShufflesPremisesOnly) {
  const Task t = igsm_worked_task();
  const auto copies = pp_aug(t, 3, 5);
  ASSERT_EQ(copies.size(), 3u);
  for (std::size_t i = 0; i < copies.size(); ++i) {
    EXPECT_EQ(copies[i].cot, t.cot);
    EXPECT_EQ(copies[i].gold, t.gold);
    EXPECT_EQ(copies[i].query.back(), t.query.back());
    EXPECT_TRUE(std::is_permutation(copies[i].query.begin(), copies[i].query.end(), t.query.begin()));
    EXPECT_TRUE(same_structure(extract_dag(copies[i]), t.dag));
    EXPECT_TRUE(verify_cot(copies[i]));
    for (std::size_t j = 0; j < i; ++j) EXPECT_NE(copies[i].query, copies[j].query);
  }
}

TEST(PpAug, OnePremiseCopiesIdentical) {
  PbConfig c;
  c.depth = 1;
  const Task t = generate_pb(c, 2);
  for (const Task& copy : pp_aug(t, 3, 1)) EXPECT_EQ(copy.query, t.query);
}

TEST(RcAug, ChainHasNoAlternative) {
  Task t;
  t.id = "chain";
  t.family = Family::promptbench;
  t.dag = classify_roles(with_values(
      test::make_dag({{"aaa", expr::Const{3}}, {"aab", expr::Square{0}}, {"aac", expr::Square{1}}}, 2)));
  t.query = render_query(t.dag, t.family, 0);
  t.cot = render_cot(t.dag, solution_order(t.dag), t.family, 0);
  t.gold = t.dag.at(t.dag.target).value;
  for (const Task& copy : rc_aug(t, 3, 1)) EXPECT_EQ(copy.cot, t.cot);
}

TEST(RcAug, WorkedExampleAlternativeOrders) {
  const Task t = igsm_worked_task();
  bool w_before_m = false;
  for (const Task& copy : rc_aug(t, 8, 3)) {
    EXPECT_TRUE(verify_cot(copy));
    EXPECT_NE(copy.cot, t.cot);
    std::size_t pw = 0, pm = 0;
    for (std::size_t i = 0; i < copy.cot.size(); ++i) {
      if (copy.cot[i].node == 4) pw = i;
      if (copy.cot[i].node == 3) pm = i;
    }
    w_before_m |= pw < pm;
  }
  EXPECT_TRUE(w_before_m);
}

TEST(RcAug, CorpusCopiesVerify) {
  for (const Task& t : corpus(100)) {
    for (const Task& copy : rc_aug(t, 2, t.meta.seed)) EXPECT_TRUE(verify_cot(copy)) << t.id;
  }
}

TEST(Rejection, WorkedExampleBuckets) {
  std::map<std::string, std::pair<int, int>> counts;
  for (int n = 0; n <= 8; ++n) counts["q" + std::to_string(n)] = {n, 8};
  std::set<std::string> want;
  for (int n = 1; n <= 7; ++n) want.insert("q" + std::to_string(n));
  EXPECT_EQ(rejection_filter(counts), want);
  EXPECT_EQ(rejection_filter({{"a", {1, 2}}}), (std::set<std::string>{"a"}));
  EXPECT_TRUE(rejection_filter({{"a", {0, 8}}, {"b", {0, 4}}}).empty());
  EXPECT_THROW(rejection_filter({{"a", {1, 1}}}), std::invalid_argument);
}

TEST(Verify, CorruptedDigitFails) {
  Task t = igsm_worked_task();
  ASSERT_TRUE(verify_cot(t));
  t.cot[1].equation_chain[1] = "5 * 2";  // "5 * 1"
  EXPECT_FALSE(verify_cot(t));
  Task g = pb_worked_task();
  g.gold = 56;
  EXPECT_FALSE(verify_cot(g));
  Task o = igsm_worked_task();
  std::swap(o.cot[0], o.cot[1]);
  EXPECT_FALSE(verify_cot(o));
}
