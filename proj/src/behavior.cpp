#include "bridge/behavior.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "bridge/arith.hpp"
#include "bridge/cot.hpp"
#include "bridge/errors.hpp"

namespace bridge {

namespace {

bool expandable(const CotStep& s) {
  if (s.kind != StepKind::compute || s.equation_chain.size() != 3) return false;
  const auto chain = arith::split_chain(s.equation_chain[1]);
  if (!chain || chain->ops.size() < 2) return false;
  return std::none_of(chain->ops.begin(), chain->ops.end(), [](char c) { return c == '*'; });
}

}  // namespace

std::vector<CotStep> inject_subgoals(const std::vector<CotStep>& cot, const Dag&, Rng* rng,
                                     double p) {
  std::vector<CotStep> out = cot;
  for (CotStep& s : out) {
    if (!expandable(s)) continue;
    if (rng != nullptr && !rng->bernoulli(p)) continue;
    const std::string numeric = s.equation_chain[1];
    s.equation_chain = {s.equation_chain[0], numeric};
    for (auto& link : arith::fold_left_steps(numeric)) s.equation_chain.push_back(std::move(link));
    s.behaviors.insert(Behavior::subgoal);
  }
  return out;
}

std::vector<CotStep> inject_analysis(const std::vector<CotStep>& cot, const Dag&, double p,
                                     Rng& rng) {
  std::vector<CotStep> out = cot;
  for (CotStep& s : out) {
    if (s.kind != StepKind::compute) continue;
    if (rng.bernoulli(p)) s.behaviors.insert(Behavior::analysis);
  }
  return out;
}

std::vector<NodeId> reflection_candidates(const Dag& dag, const std::set<NodeId>& solved,
                                          const std::set<NodeId>& pending) {
  const auto needed = ancestor_closure(dag, dag.target);
  std::vector<NodeId> out;
  for (NodeId v : locked_nodes(dag, solved)) {
    if (!needed[v] || pending.contains(v)) continue;
    const auto refs = expr_refs(dag.at(v).expr);
    if (std::any_of(refs.begin(), refs.end(), [&](NodeId r) { return solved.contains(r); })) {
      out.push_back(v);
    }
  }
  return out;
}

std::vector<CotStep> inject_reflection(const std::vector<CotStep>& cot, const Dag& dag, double p,
                                       Rng& rng, std::optional<std::size_t> max_reflections) {
  std::map<NodeId, std::string> alias_of;
  for (const CotStep& s : cot) {
    if (s.kind == StepKind::compute) alias_of[s.node] = s.alias;
  }
  std::vector<CotStep> out;
  std::set<NodeId> solved;
  std::set<NodeId> pending;
  for (const CotStep& s : cot) {
    CotStep step = s;
    if (step.kind == StepKind::attempt) {
      pending.insert(step.node);
      out.push_back(std::move(step));
      continue;
    }
    if (pending.erase(step.node) > 0) step.behaviors.insert(Behavior::reflection_resolve);
    solved.insert(step.node);
    out.push_back(std::move(step));

    if (max_reflections) {
      std::size_t used = 0;
      for (const CotStep& o : out) used += o.kind == StepKind::attempt ? 1 : 0;
      if (used >= *max_reflections) continue;
    }
    if (!rng.bernoulli(p)) continue;
    const auto candidates = reflection_candidates(dag, solved, pending);
    if (candidates.empty()) continue;
    const NodeId v = rng.pick(candidates);
    std::vector<NodeId> missing;
    for (NodeId r : expr_refs(dag.at(v).expr)) {
      if (!solved.contains(r) && std::find(missing.begin(), missing.end(), r) == missing.end()) {
        missing.push_back(r);
      }
    }
    CotStep attempt;
    attempt.node = v;
    attempt.alias = alias_of.at(v);
    attempt.kind = StepKind::attempt;
    attempt.missing = rng.pick(missing);
    attempt.behaviors.insert(Behavior::reflection_attempt);
    pending.insert(v);
    out.push_back(std::move(attempt));
  }
  return out;
}

void record_behaviors(Task& task) {
  task.meta.behaviors.clear();
  for (std::size_t i = 0; i < task.cot.size(); ++i) {
    for (Behavior b : task.cot[i].behaviors) task.meta.behaviors.push_back({b, i});
  }
}

Task bridge_augment(const Task& task, const InjectConfig& config) {
  Rng rng(derive_seed(config.seed, 0x42524944ULL));
  Task out = task;
  out.cot = config.subgoal_always ? inject_subgoals(out.cot, out.dag)
                                  : inject_subgoals(out.cot, out.dag, &rng, config.p);
  out.cot = inject_analysis(out.cot, out.dag, config.p, rng);
  out.cot = inject_reflection(out.cot, out.dag, config.p, rng, config.max_reflections);
  if (out.cot != task.cot) out.meta.augmentation = "bridge";
  record_behaviors(out);
  return out;
}

std::vector<Task> pp_aug(const Task& task, std::size_t copies, std::uint64_t seed) {
  std::vector<Task> out;
  const std::size_t premises = task.query.empty() ? 0 : task.query.size() - 1;
  std::vector<std::vector<std::string>> seen{task.query};
  for (std::size_t i = 0; i < copies; ++i) {
    Rng rng(derive_seed(seed, i));
    Task t = task;
    for (int tries = 0; tries < 16; ++tries) {
      std::vector<std::string> body(task.query.begin(), task.query.begin() + static_cast<std::ptrdiff_t>(premises));
      rng.shuffle(body);
      if (!task.query.empty()) body.push_back(task.query.back());
      t.query = std::move(body);
      if (std::find(seen.begin(), seen.end(), t.query) == seen.end()) break;
    }
    seen.push_back(t.query);
    t.id = task.id + "-pp" + std::to_string(i);
    t.meta.augmentation = "pp";
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Task> rc_aug(const Task& task, std::size_t copies, std::uint64_t seed) {
  std::vector<NodeId> canonical;
  for (const CotStep& s : task.cot) {
    if (s.kind == StepKind::compute) canonical.push_back(s.node);
  }
  std::vector<Task> out;
  for (std::size_t i = 0; i < copies; ++i) {
    Rng rng(derive_seed(seed, i));
    std::vector<NodeId> order;
    for (int tries = 0; tries < 8; ++tries) {
      order = solution_order(task.dag, rng.next());
      if (order != canonical) break;
    }
    Task t = task;
    t.cot = render_cot(task.dag, order, task.family, rng.next());
    t.id = task.id + "-rc" + std::to_string(i);
    t.meta.augmentation = "rc";
    t.meta.behaviors.clear();
    out.push_back(std::move(t));
  }
  return out;
}

std::set<std::string> rejection_filter(const std::map<std::string, std::pair<int, int>>& counts) {
  std::set<std::string> kept;
  for (const auto& [id, nN] : counts) {
    const auto [n, N] = nN;
    if (N < 2) throw std::invalid_argument("rejection_filter: '" + id + "' has N < 2");
    if (n < 0 || n > N) throw std::invalid_argument("rejection_filter: '" + id + "' has n outside [0, N]");
    if (n >= 1 && n <= N - 1) kept.insert(id);
  }
  return kept;
}

std::optional<std::string> cot_problem(const Task& task) {
  const Dag& dag = task.dag;
  if (const auto v = validate(dag); !v.empty()) return "invalid dag: " + v.front().message;
  std::vector<std::int64_t> values;
  try {
    values = evaluate(dag);
  } catch (const ArithmeticOverflow& e) {
    return std::string("dag overflows: ") + e.what();
  }
  for (const Node& n : dag.nodes) {
    if (n.value != values[n.id]) return "stored value of '" + n.name + "' is not its evaluation";
  }
  if (task.gold != values[dag.target]) return "gold " + std::to_string(task.gold) + " is not the target value";

  const auto needed = ancestor_closure(dag, dag.target);
  std::vector<std::string> alias_of(dag.size());
  std::map<std::string, NodeId> node_of_alias;
  std::set<NodeId> solved;
  std::set<NodeId> pending;
  auto bind = [&](NodeId v, const std::string& alias) -> std::optional<std::string> {
    if (alias.empty()) return "empty alias";
    if (task.family == Family::promptbench && alias != dag.at(v).name) return "alias differs from name";
    if (task.family == Family::igsm && (alias.size() != 1 || !std::isalpha(static_cast<unsigned char>(alias[0])))) {
      return "alias '" + alias + "' is not a single letter";
    }
    if (!alias_of[v].empty() && alias_of[v] != alias) return "node '" + dag.at(v).name + "' has two aliases";
    const auto it = node_of_alias.find(alias);
    if (it != node_of_alias.end() && it->second != v) return "alias '" + alias + "' names two nodes";
    alias_of[v] = alias;
    node_of_alias[alias] = v;
    return std::nullopt;
  };
  const arith::Lookup lookup = [&](std::string_view a) -> std::optional<std::int64_t> {
    const auto it = node_of_alias.find(std::string(a));
    if (it == node_of_alias.end() || !solved.contains(it->second)) return std::nullopt;
    return values[it->second];
  };

  for (std::size_t i = 0; i < task.cot.size(); ++i) {
    const CotStep& s = task.cot[i];
    const std::string where = "step " + std::to_string(i) + ": ";
    if (s.node >= dag.size()) return where + "node id out of range";
    const Node& n = dag.at(s.node);
    if (!needed[s.node]) return where + "solves redundant node '" + n.name + "'";
    if (solved.contains(s.node)) return where + "'" + n.name + "' solved twice";
    if (auto e = bind(s.node, s.alias)) return where + *e;
    const auto refs = expr_refs(n.expr);

    if (s.kind == StepKind::attempt) {
      if (!s.missing) return where + "attempt without a missing dependency";
      if (std::find(refs.begin(), refs.end(), *s.missing) == refs.end()) {
        return where + "attempt cites a node '" + n.name + "' does not depend on";
      }
      if (solved.contains(*s.missing)) return where + "attempt cites an already solved dependency";
      if (!s.behaviors.contains(Behavior::reflection_attempt)) return where + "attempt not tagged";
      pending.insert(s.node);
      continue;
    }
    for (NodeId r : refs) {
      if (!solved.contains(r)) return where + "'" + n.name + "' uses unsolved '" + dag.at(r).name + "'";
    }
    const bool was_pending = pending.erase(s.node) > 0;
    if (was_pending != s.behaviors.contains(Behavior::reflection_resolve)) {
      return where + "resolve tag does not match an earlier attempt";
    }
    if (s.behaviors.contains(Behavior::reflection_attempt)) return where + "compute step tagged as attempt";
    if (s.equation_chain.empty()) return where + "empty equation chain";
    if (s.equation_chain.back() != std::to_string(n.value)) return where + "chain does not end in the value";
    const CotStep expect = make_compute_step(dag, s.node, task.family, alias_of, 0);
    if (s.equation_chain.front() != expect.equation_chain.front()) {
      return where + "equation '" + s.equation_chain.front() + "' does not match the premise";
    }
    for (const std::string& link : s.equation_chain) {
      try {
        if (arith::evaluate(link, lookup).value != n.value) {
          return where + "link '" + link + "' does not evaluate to " + std::to_string(n.value);
        }
      } catch (const FormatError& e) {
        return where + e.what();
      } catch (const ArithmeticOverflow& e) {
        return where + e.what();
      }
    }
    solved.insert(s.node);
  }
  if (!pending.empty()) return "attempted node '" + dag.at(*pending.begin()).name + "' never solved";
  for (NodeId v = 0; v < dag.size(); ++v) {
    if (needed[v] && !solved.contains(v)) return "needed node '" + dag.at(v).name + "' never solved";
  }
  return std::nullopt;
}

bool verify_cot(const Task& task) { return !cot_problem(task).has_value(); }

}  // namespace bridge
