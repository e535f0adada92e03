#include "bridge/worked_examples.hpp"

#include "bridge/cot.hpp"

namespace bridge {

namespace {

struct Spec {
  const char* name;
  Expr expr;
  LayerTag layer;
};

Dag build(const std::vector<Spec>& specs, NodeId target) {
  Dag dag;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Node n;
    n.id = static_cast<NodeId>(i);
    n.name = specs[i].name;
    n.expr = specs[i].expr;
    n.layer = specs[i].layer;
    dag.nodes.push_back(std::move(n));
  }
  dag.target = target;
  return classify_roles(with_values(std::move(dag)));
}

constexpr auto I = LayerTag::instance;
constexpr auto A = LayerTag::abstract;

}  // namespace

CategoryTable igsm_worked_categories() {
  return {
      {"Classroom", {"Pottery Classroom", "Painting Room", "Graphic Design Studio"}},
      {"Backpack", {"Printed Casual Backpack", "Designer Bag", "Manager Backpack"}},
  };
}

Task igsm_worked_task() {
  using namespace expr;
  // ids 0..8 are the solution nodes S, Q, U, m, W, v, B, p, y.
  const std::vector<Spec> specs = {
      {"Pottery Classroom's Printed Casual Backpack", Const{1}, I},
      {"Oakwood Middle School's Pottery Classroom", Scale{5, 0}, I},
      {"Painting Room's Designer Bag", AddK{0, {1}}, I},
      {"Oakwood Middle School's Graphic Design Studio", AddK{8, {2}}, I},
      {"Oakwood Middle School's Painting Room", Const{6}, I},
      {"Oakwood Middle School's Classroom", SumChildren{{3, 1, 4}}, A},
      {"Rising Stars Junior High's Pottery Classroom", Scale{2, 5}, I},
      {"Rising Stars Junior High's Classroom", SumChildren{{6}}, A},
      {"Graphic Design Studio's Manager Backpack", Diff{7, 5}, I},
      {"Painting Room's Printed Casual Backpack", AddK{9, {2, 0}}, I},
      {"Crestview Middle School's Graphic Design Studio", Diff{2, 4}, I},
      {"Pottery Classroom's Designer Bag", Sum{{2}}, I},
      {"Pottery Classroom's Manager Backpack", Const{0}, I},
      {"Crestview Middle School's Painting Room", Const{5}, I},
      {"Graphic Design Studio's Backpack", SumChildren{{8}}, A},
      {"Painting Room's Manager Backpack", AddK{0, {14, 1, 4}}, I},
  };
  Task t;
  t.id = "igsm-worked";
  t.family = Family::igsm;
  t.dag = build(specs, 8);
  t.query = render_query_ordered(t.dag, t.family, {8, 2, 9, 10, 11, 12, 0, 6, 4, 13, 15, 1, 3});

  const std::vector<std::string> aliases = {"S", "Q", "U", "m", "W", "v", "B", "p", "y"};
  const int leads[] = {0, 0, 1, 2, 1, 3, 2, 4, 0};
  std::vector<std::string> alias_of(t.dag.size());
  for (NodeId v = 0; v < 9; ++v) {
    alias_of[v] = aliases[v];
    t.cot.push_back(make_compute_step(t.dag, v, t.family, alias_of, leads[v]));
  }
  t.gold = t.dag.at(t.dag.target).value;
  t.meta.op_count = op_count(t.dag);
  t.meta.categories = igsm_worked_categories();
  t.meta.redundant_premises = true;
  return t;
}

Task igsm_worked_bridge_task() {
  Task t = igsm_worked_task();
  t.id = "igsm-worked-bridge";
  t.meta.augmentation = "bridge";

  CotStep& v = t.cot[5];
  v.equation_chain = {"m + Q + W", "13 + 5 + 6", "18 + 6", "24"};
  v.behaviors.insert(Behavior::subgoal);

  CotStep& y = t.cot[8];
  y.lead = 1;
  y.behaviors.insert(Behavior::analysis);
  y.behaviors.insert(Behavior::reflection_resolve);

  CotStep attempt;
  attempt.node = 8;
  attempt.alias = "y";
  attempt.kind = StepKind::attempt;
  attempt.missing = 7;
  attempt.behaviors.insert(Behavior::reflection_attempt);
  t.cot.insert(t.cot.begin() + 6, attempt);

  t.meta.behaviors = {{Behavior::subgoal, 5},
                      {Behavior::reflection_attempt, 6},
                      {Behavior::reflection_resolve, 9},
                      {Behavior::analysis, 9}};
  return t;
}

Task pb_worked_task() {
  using namespace expr;
  constexpr auto N = LayerTag::none;
  enum : NodeId { aaa, aab, aac, aad, aae, aaf, aag, aah, aai, aaj, aak, aan, aao, aap,
                  aaq, aar, aas, aat, aau, aav };
  const std::vector<Spec> specs = {
      {"aaa", Const{9}, N},          {"aab", Square{aaa}, N},       {"aac", Const{5}, N},
      {"aad", Const{5}, N},          {"aae", Diff{aad, aac}, N},    {"aaf", Sum{{aab, aae}}, N},
      {"aag", Const{6}, N},          {"aah", Const{2}, N},          {"aai", Mul{aah, aag}, N},
      {"aaj", Const{5}, N},          {"aak", Const{9}, N},          {"aan", Sum{{aak, aaj}}, N},
      {"aao", Sum{{aai, aan}}, N},   {"aap", Diff{aaf, aao}, N},    {"aaq", Const{5}, N},
      {"aar", Const{2}, N},          {"aas", Mul{aaq, aar}, N},     {"aat", Const{3}, N},
      {"aau", Const{10}, N},         {"aav", Mul{aat, aau}, N},
  };
  Task t;
  t.id = "pb-worked";
  t.family = Family::promptbench;
  t.dag = build(specs, aap);
  t.query = render_query_ordered(t.dag, t.family,
                                 {aac, aaf, aaj, aak, aar, aaa, aat, aao, aad, aas,
                                  aaq, aan, aau, aai, aap, aah, aav, aab, aag, aae});
  std::vector<std::string> names;
  for (const Node& n : t.dag.nodes) names.push_back(n.name);
  for (NodeId v : {aaa, aab, aac, aad, aae, aaf, aah, aaj, aag, aai, aak, aan, aao, aap}) {
    t.cot.push_back(make_compute_step(t.dag, v, t.family, names, 0));
  }
  t.gold = t.dag.at(t.dag.target).value;
  t.meta.depth = 4;
  t.meta.redundancy = 2;
  t.meta.redundant_premises = true;
  return t;
}

}  // namespace bridge
