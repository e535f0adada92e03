#include "bridge/cot.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "bridge/arith.hpp"
#include "bridge/errors.hpp"
#include "bridge/rng.hpp"

namespace bridge {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// "each A", "each A and each B", "each A, each B and each C"
std::string each_list(const Dag& dag, const std::vector<NodeId>& refs) {
  std::string out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (i > 0) out += (i + 1 == refs.size()) ? " and " : ", ";
    out += "each " + dag.at(refs[i]).name;
  }
  return out;
}

// Right-hand side of an iGSM premise ("5 times each X"); `between` selects the
// analysis wording for differences.
std::string igsm_rhs(const Dag& dag, const Expr& e, bool between) {
  return std::visit(
      overloaded{
          [](const expr::Const& x) { return std::to_string(x.k); },
          [&](const expr::AddK& x) {
            if (x.refs.size() == 1) return std::to_string(x.k) + " more than " + each_list(dag, x.refs);
            return std::to_string(x.k) + " more than the sum of " + each_list(dag, x.refs);
          },
          [&](const expr::Sum& x) {
            if (x.refs.size() == 1) return each_list(dag, x.refs);
            return "the sum of " + each_list(dag, x.refs);
          },
          [&](const expr::SumChildren& x) {
            if (x.refs.size() == 1) return each_list(dag, x.refs);
            return "the sum of " + each_list(dag, x.refs);
          },
          [&](const expr::Diff& x) {
            return std::string(between ? "the difference between " : "the difference of ") +
                   each_list(dag, {x.a, x.b});
          },
          [&](const expr::Scale& x) {
            return std::to_string(x.k) + " times " + each_list(dag, {x.ref});
          },
          [&](const expr::Mul& x) { return "the product of " + each_list(dag, {x.a, x.b}); },
          [&](const expr::Square& x) { return "the square of " + each_list(dag, {x.ref}); },
      },
      e);
}

std::string pb_premise(const Dag& dag, NodeId id) {
  const Node& n = dag.at(id);
  auto nm = [&](NodeId r) { return dag.at(r).name; };
  return std::visit(
      overloaded{
          [&](const expr::Const& x) { return "The value of " + n.name + " is " + std::to_string(x.k) + "."; },
          [&](const expr::Sum& x) {
            if (x.refs.size() != 2) {
              throw TemplateError("promptbench: no template for a " + std::to_string(x.refs.size()) +
                                  "-operand sum at '" + n.name + "'");
            }
            return n.name + " gets its value by adding together the value of " + nm(x.refs[0]) +
                   " and " + nm(x.refs[1]) + ".";
          },
          [&](const expr::Diff& x) {
            return n.name + " gets its value by subtracting the value of " + nm(x.b) +
                   " from the value of " + nm(x.a) + ".";
          },
          [&](const expr::Mul& x) {
            return n.name + " gets its value by multiplying together the value of " + nm(x.a) +
                   " and " + nm(x.b) + ".";
          },
          [&](const expr::Square& x) {
            return n.name + " gets its value by squaring the value that " + nm(x.ref) + " has.";
          },
          [&](const auto& x) -> std::string {
            throw TemplateError("promptbench: no template for " + std::string(expr_tag(Expr{x})) +
                                " at '" + n.name + "'");
          },
      },
      n.expr);
}

// iGSM names are "<entity>'s <item>".
std::pair<std::string, std::string> split_possessive(const std::string& name) {
  const auto pos = name.find("'s ");
  if (pos == std::string::npos) {
    throw TemplateError("igsm: node name without possessive: '" + name + "'");
  }
  return {name.substr(0, pos), name.substr(pos + 3)};
}

constexpr std::array<std::string_view, kIgsmConstLeads> kConstLeads = {
    "According to the information given, the number of each {N} is {v}. Let's denote it as {a}.",
    "The number of each {N} is {v}. Let's denote it as {a}.",
};

constexpr std::array<std::string_view, kIgsmComputeLeads> kComputeLeads = {
    "Next, let {a} represent the number of each {N}.",
    "Now, we can find the number of each {N}. Let's denote it as {a}.",
    "We can then calculate the number of each {N}. Let it be {a}.",
    "Then, let's denote the number of each {N} as {a}.",
    "Now, we can find the number of each {N}. Let it be {a}.",
};

constexpr std::array<std::string_view, kIgsmComputeLeads> kResolveLeads = {
    "Next, we come back to the number of each {N}. Remember that it has been denoted as {a}.",
    "Now, we can find the number of each {N}. Remember that it has been denoted as {a}.",
    "We can then calculate the number of each {N}. Remember that it has been denoted as {a}.",
    "Then, let's go back to the number of each {N}. Remember that it has been denoted as {a}.",
    "Now, we can find the number of each {N}. Remember that it has been denoted as {a}.",
};

std::string fill(std::string_view tmpl, const std::string& name, const std::string& alias,
                 std::int64_t value) {
  std::string s(tmpl);
  s = replace_all(std::move(s), "{N}", name);
  s = replace_all(std::move(s), "{a}", alias);
  s = replace_all(std::move(s), "{v}", std::to_string(value));
  return s;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

// Expression text with each ref rendered through `term`.
template <class Term>
std::string expr_text(const Expr& e, Family, const Term& term) {
  auto joined = [&](std::vector<NodeId> refs, std::string_view op) {
    std::vector<std::string> parts;
    for (NodeId r : refs) parts.push_back(term(r));
    return join(parts, op);
  };
  return std::visit(
      overloaded{
          [](const expr::Const& x) { return std::to_string(x.k); },
          [&](const expr::AddK& x) { return arith::operand(x.k) + " + " + joined(x.refs, " + "); },
          [&](const expr::Sum& x) { return joined(x.refs, " + "); },
          [&](const expr::SumChildren& x) { return joined(x.refs, " + "); },
          [&](const expr::Diff& x) { return term(x.a) + " - " + term(x.b); },
          [&](const expr::Scale& x) { return arith::operand(x.k) + " * " + term(x.ref); },
          [&](const expr::Mul& x) { return term(x.a) + " * " + term(x.b); },
          [&](const expr::Square& x) { return term(x.ref) + "^2"; },
      },
      e);
}

// PromptBench prints commutative operands in name order.
Expr pb_display_expr(const Dag& dag, Expr e) {
  auto by_name = [&](NodeId a, NodeId b) { return dag.at(a).name < dag.at(b).name; };
  if (auto* s = std::get_if<expr::Sum>(&e)) {
    std::sort(s->refs.begin(), s->refs.end(), by_name);
  } else if (auto* m = std::get_if<expr::Mul>(&e)) {
    if (by_name(m->b, m->a)) std::swap(m->a, m->b);
  }
  return e;
}

}  // namespace

std::string_view to_string(Family f) { return f == Family::igsm ? "igsm" : "promptbench"; }

Family family_from_string(std::string_view s) {
  if (s == "igsm") return Family::igsm;
  if (s == "promptbench" || s == "pb") return Family::promptbench;
  throw std::invalid_argument("unknown family: " + std::string(s));
}

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::subgoal:
      return "subgoal";
    case Behavior::analysis:
      return "analysis";
    case Behavior::reflection_attempt:
      return "reflection-attempt";
    case Behavior::reflection_resolve:
      return "reflection-resolve";
  }
  return "subgoal";
}

Behavior behavior_from_string(std::string_view s) {
  if (s == "subgoal") return Behavior::subgoal;
  if (s == "analysis") return Behavior::analysis;
  if (s == "reflection-attempt") return Behavior::reflection_attempt;
  if (s == "reflection-resolve") return Behavior::reflection_resolve;
  throw std::invalid_argument("unknown behavior: " + std::string(s));
}

std::vector<NodeId> premise_nodes(const Dag& dag, Family family) {
  std::vector<NodeId> out;
  for (const Node& n : dag.nodes) {
    if (family == Family::promptbench || n.layer != LayerTag::abstract) out.push_back(n.id);
  }
  return out;
}

std::string render_premise(const Dag& dag, NodeId id, Family family) {
  const Node& n = dag.at(id);
  if (family == Family::promptbench) return pb_premise(dag, id);
  if (std::holds_alternative<expr::SumChildren>(n.expr)) {
    throw TemplateError("igsm: abstract node '" + n.name + "' has no premise");
  }
  return "The number of each " + n.name + " equals " + igsm_rhs(dag, n.expr, false) + ".";
}

std::string render_question(const Dag& dag, Family family) {
  const Node& t = dag.at(dag.target);
  if (family == Family::promptbench) return "What is the value of " + t.name + "?";
  const auto [entity, item] = split_possessive(t.name);
  return "How many " + item + " does each " + entity + " have?";
}

std::vector<std::string> render_query_ordered(const Dag& dag, Family family,
                                              const std::vector<NodeId>& premise_order) {
  std::vector<std::string> out;
  out.reserve(premise_order.size() + 1);
  for (NodeId id : premise_order) out.push_back(render_premise(dag, id, family));
  out.push_back(render_question(dag, family));
  return out;
}

std::vector<std::string> render_query(const Dag& dag, Family family, std::uint64_t seed) {
  auto order = premise_nodes(dag, family);
  Rng rng(seed);
  rng.shuffle(order);
  return render_query_ordered(dag, family, order);
}

namespace {

std::vector<std::string> igsm_chain(const Dag& dag, NodeId id,
                                    const std::vector<std::string>& alias_of) {
  const Node& n = dag.at(id);
  std::vector<std::string> chain;
  auto push = [&](std::string s) {
    if (chain.empty() || chain.back() != s) chain.push_back(std::move(s));
  };
  push(expr_text(n.expr, Family::igsm, [&](NodeId r) {
    if (alias_of.at(r).empty()) {
      throw DagError("render_cot: '" + n.name + "' uses unsolved '" + dag.at(r).name + "'");
    }
    return alias_of[r];
  }));
  push(expr_text(n.expr, Family::igsm, [&](NodeId r) { return arith::operand(dag.at(r).value); }));
  push(std::to_string(n.value));
  return chain;
}

}  // namespace

CotStep make_compute_step(const Dag& dag, NodeId id, Family family,
                          const std::vector<std::string>& alias_of, int lead) {
  const Node& n = dag.at(id);
  CotStep step;
  step.node = id;
  step.kind = StepKind::compute;
  step.lead = lead;
  if (family == Family::igsm) {
    step.alias = alias_of.at(id);
    step.equation_chain = igsm_chain(dag, id, alias_of);
    return step;
  }
  step.alias = n.name;
  if (expr_refs(n.expr).empty()) {
    step.equation_chain = {std::to_string(n.value)};
  } else {
    const Expr shown = pb_display_expr(dag, n.expr);
    step.equation_chain = {expr_text(shown, family, [&](NodeId r) { return dag.at(r).name; }),
                           std::to_string(n.value)};
  }
  return step;
}

std::vector<CotStep> render_cot(const Dag& dag, const std::vector<NodeId>& order, Family family,
                                std::uint64_t seed) {
  const auto needed = ancestor_closure(dag, dag.target);
  std::vector<bool> seen(dag.size(), false);
  std::size_t needed_count = 0;
  for (bool b : needed) needed_count += b ? 1 : 0;
  if (order.size() != needed_count) {
    throw DagError("render_cot: order must cover exactly the non-redundant nodes");
  }
  for (NodeId v : order) {
    if (v >= dag.size() || !needed[v] || seen[v]) {
      throw DagError("render_cot: order contains an invalid or repeated node");
    }
    for (NodeId r : expr_refs(dag.at(v).expr)) {
      if (!seen[r]) {
        throw DagError("render_cot: '" + dag.at(v).name + "' placed before its dependency '" +
                       dag.at(r).name + "'");
      }
    }
    seen[v] = true;
  }

  Rng rng(seed);
  std::vector<CotStep> steps;
  steps.reserve(order.size());
  if (family == Family::promptbench) {
    std::vector<std::string> names;
    for (const Node& n : dag.nodes) names.push_back(n.name);
    for (NodeId v : order) steps.push_back(make_compute_step(dag, v, family, names, 0));
    return steps;
  }

  std::vector<std::string> letters;
  for (char c = 'A'; c <= 'Z'; ++c) letters.emplace_back(1, c);
  for (char c = 'a'; c <= 'z'; ++c) letters.emplace_back(1, c);
  if (order.size() > letters.size()) {
    throw TemplateError("igsm: more than 52 solution steps; aliases exhausted");
  }
  rng.shuffle(letters);

  std::vector<std::string> alias_of(dag.size());
  int rotor = static_cast<int>(rng.index(kIgsmConstLeads * kIgsmComputeLeads));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const NodeId v = order[i];
    alias_of[v] = letters[i];
    rotor += 1 + (rng.bernoulli(0.3) ? 1 : 0);
    const bool is_const = expr_refs(dag.at(v).expr).empty();
    steps.push_back(make_compute_step(dag, v, family, alias_of,
                                      rotor % (is_const ? kIgsmConstLeads : kIgsmComputeLeads)));
  }
  return steps;
}

std::string analysis_text(const Dag& dag, NodeId id, Family family) {
  if (family == Family::igsm) {
    return "We know that it equals " + igsm_rhs(dag, dag.at(id).expr, true) + ".";
  }
  std::string premise = pb_premise(dag, id);
  premise.pop_back();  // trailing '.'
  if (premise.rfind("The ", 0) == 0) premise[0] = 't';
  return "since " + premise;
}

std::string render_step(const Dag& dag, const CotStep& step, Family family) {
  const Node& n = dag.at(step.node);
  const bool analysis = step.behaviors.contains(Behavior::analysis);
  const bool resolve = step.behaviors.contains(Behavior::reflection_resolve);

  if (family == Family::promptbench) {
    if (step.kind == StepKind::attempt) {
      return "Let's solve " + n.name + ", wait, we haven't calculated " +
             dag.at(step.missing.value()).name + " yet, thus " + n.name +
             " seems to be not solvable yet, let's get back.";
    }
    std::string s = "Let's solve " + n.name;
    if (resolve) s += " again, now it is solvable";
    s += ", ";
    if (analysis) s += analysis_text(dag, step.node, family) + ", ";
    if (step.equation_chain.size() == 1) {
      s += n.name + " is " + step.equation_chain.front();
    } else {
      s += n.name + " = " + join(step.equation_chain, " = ");
    }
    return s;
  }

  if (step.kind == StepKind::attempt) {
    return "- Then, let's denote the number of each " + n.name + " as " + step.alias +
           ". But we haven't calculated the number of each " + dag.at(step.missing.value()).name +
           " yet, thus the value of " + step.alias + " is still unknown.";
  }
  const bool is_const = expr_refs(n.expr).empty();
  std::string s = "- ";
  if (is_const) {
    s += fill(kConstLeads.at(static_cast<std::size_t>(step.lead) % kIgsmConstLeads), n.name,
              step.alias, n.value);
  } else if (resolve) {
    s += fill(kResolveLeads.at(static_cast<std::size_t>(step.lead) % kIgsmComputeLeads), n.name,
              step.alias, n.value);
  } else {
    s += fill(kComputeLeads.at(static_cast<std::size_t>(step.lead) % kIgsmComputeLeads), n.name,
              step.alias, n.value);
  }
  if (analysis) s += " " + analysis_text(dag, step.node, family);
  s += is_const ? " So " : " Then ";
  s += step.alias + " = " + join(step.equation_chain, " = ") + ".";
  return s;
}

std::vector<std::string> render_answer_lines(const Task& task) {
  std::vector<std::string> lines{"Let's compute the answer step by step."};
  for (const CotStep& s : task.cot) lines.push_back(render_step(task.dag, s, task.family));
  lines.push_back("Thus, the answer is " + std::to_string(task.gold) + ".");
  return lines;
}

std::string render_answer(const Task& task) { return join(render_answer_lines(task), "\n"); }

std::string render_query_text(const Task& task) { return join(task.query, "\n"); }

const std::string_view kSystemPrompt =
    "A conversation that the assistant solves the user's problem. The assistant first thinks "
    "about the reasoning process in the mind and then provides the user with the answer. The "
    "reasoning process and answer are enclosed within <think> </think> and <answer> </answer> "
    "tags, respectively, i.e., <think> all the reasoning process here </think> <answer> final "
    "answer here </answer>.";

std::string render_sft_record(const Task& task, std::string_view template_family) {
  const std::string query = render_query_text(task);
  const std::string assistant = "<think> " + render_answer(task) + " </think>\n<answer> The final answer is \\boxed{" +
                                std::to_string(task.gold) + "} </answer>";
  const std::string system(kSystemPrompt);
  if (template_family == "qwen") {
    return "<|im_start|>system<|im_end|>\n" + system + "\n<|im_start|>user<|im_end|>\n" + query +
           "\n<|im_start|>assistant<|im_end|>\n" + assistant;
  }
  if (template_family == "llama") {
    return "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n\n" + system +
           "<|eot_id|><|start_header_id|>user<|end_header_id|>\n\n" + query +
           "<|eot_id|><|start_header_id|>assistant<|end_header_id|>\n\n" + assistant + "<|eot_id|>";
  }
  if (template_family == "plain") {
    return "System: " + system + "\nUser: " + query + "\nAssistant: " + assistant;
  }
  throw std::invalid_argument("unknown template family: " + std::string(template_family));
}

}  // namespace bridge
