#include "bridge/dag.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "bridge/errors.hpp"
#include "bridge/rng.hpp"

namespace bridge {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<NodeId> expr_refs(const Expr& e) {
  return std::visit(
      overloaded{
          [](const expr::Const&) { return std::vector<NodeId>{}; },
          [](const expr::AddK& x) { return x.refs; },
          [](const expr::Sum& x) { return x.refs; },
          [](const expr::Diff& x) { return std::vector<NodeId>{x.a, x.b}; },
          [](const expr::Scale& x) { return std::vector<NodeId>{x.ref}; },
          [](const expr::Mul& x) { return std::vector<NodeId>{x.a, x.b}; },
          [](const expr::Square& x) { return std::vector<NodeId>{x.ref}; },
          [](const expr::SumChildren& x) { return x.refs; },
      },
      e);
}

std::string_view expr_tag(const Expr& e) {
  static constexpr std::string_view tags[] = {"const", "add_k", "sum",    "diff",
                                              "scale", "mul",   "square", "sum_children"};
  return tags[e.index()];
}

Expr remap_refs(const Expr& e, const std::vector<NodeId>& map) {
  auto m = [&](NodeId id) { return map.at(id); };
  auto mv = [&](const std::vector<NodeId>& v) {
    std::vector<NodeId> out;
    out.reserve(v.size());
    for (NodeId id : v) {
      out.push_back(m(id));
    }
    return out;
  };
  return std::visit(overloaded{
                        [](const expr::Const& x) -> Expr { return x; },
                        [&](const expr::AddK& x) -> Expr { return expr::AddK{x.k, mv(x.refs)}; },
                        [&](const expr::Sum& x) -> Expr { return expr::Sum{mv(x.refs)}; },
                        [&](const expr::Diff& x) -> Expr { return expr::Diff{m(x.a), m(x.b)}; },
                        [&](const expr::Scale& x) -> Expr { return expr::Scale{x.k, m(x.ref)}; },
                        [&](const expr::Mul& x) -> Expr { return expr::Mul{m(x.a), m(x.b)}; },
                        [&](const expr::Square& x) -> Expr { return expr::Square{m(x.ref)}; },
                        [&](const expr::SumChildren& x) -> Expr {
                          return expr::SumChildren{mv(x.refs)};
                        },
                    },
                    e);
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::leaf:
      return "leaf";
    case Role::intermediate:
      return "intermediate";
    case Role::target:
      return "target";
    case Role::redundant:
      return "redundant";
  }
  return "intermediate";
}

std::string_view to_string(LayerTag t) {
  switch (t) {
    case LayerTag::none:
      return "none";
    case LayerTag::abstract:
      return "abstract";
    case LayerTag::instance:
      return "instance";
  }
  return "none";
}

Role role_from_string(std::string_view s) {
  if (s == "leaf") return Role::leaf;
  if (s == "intermediate") return Role::intermediate;
  if (s == "target") return Role::target;
  if (s == "redundant") return Role::redundant;
  throw std::invalid_argument("unknown role: " + std::string(s));
}

LayerTag layer_from_string(std::string_view s) {
  if (s == "none") return LayerTag::none;
  if (s == "abstract") return LayerTag::abstract;
  if (s == "instance") return LayerTag::instance;
  throw std::invalid_argument("unknown layer tag: " + std::string(s));
}

std::optional<NodeId> Dag::find(std::string_view name) const {
  for (const Node& n : nodes) {
    if (n.name == name) {
      return n.id;
    }
  }
  return std::nullopt;
}

namespace {

bool arity_ok(const Expr& e) {
  return std::visit(overloaded{
                        [](const expr::AddK& x) { return !x.refs.empty() && x.k >= 0; },
                        [](const expr::Sum& x) { return !x.refs.empty(); },
                        [](const expr::SumChildren& x) { return !x.refs.empty(); },
                        [](const expr::Scale& x) { return x.k >= 2; },
                        [](const auto&) { return true; },
                    },
                    e);
}

}  // namespace

std::vector<Violation> validate(const Dag& dag) {
  using K = Violation::Kind;
  std::vector<Violation> out;
  const std::size_t n = dag.nodes.size();

  std::unordered_set<std::string> names;
  bool refs_ok = true;
  std::size_t target_tags = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = dag.nodes[i];
    if (node.id != i) {
      out.push_back({K::bad_id, static_cast<NodeId>(i),
                     "node at position " + std::to_string(i) + " has id " +
                         std::to_string(node.id)});
    }
    if (!names.insert(node.name).second) {
      out.push_back({K::duplicate_name, node.id, "duplicate name '" + node.name + "'"});
    }
    if (!arity_ok(node.expr)) {
      out.push_back({K::bad_arity, node.id,
                     "bad operands for " + std::string(expr_tag(node.expr)) + " at " +
                         std::to_string(node.id)});
    }
    for (NodeId r : expr_refs(node.expr)) {
      if (r >= n) {
        refs_ok = false;
        out.push_back({K::dangling_ref, node.id, "dangling ref " + std::to_string(r)});
      }
    }
    if (node.role == Role::target) {
      ++target_tags;
      if (node.id != dag.target) {
        out.push_back({K::bad_target, node.id,
                       "node " + std::to_string(node.id) + " tagged target but dag.target is " +
                           std::to_string(dag.target)});
      }
    }
  }
  if (dag.target >= n) {
    out.push_back({K::bad_target, dag.target, "target " + std::to_string(dag.target) + " missing"});
  }

  if (!refs_ok) {
    return out;
  }
  // Iterative DFS; a back edge closes a cycle at the referenced node.
  enum Color : std::uint8_t { white, grey, black };
  std::vector<Color> color(n, white);
  std::set<NodeId> cycle_at;
  for (std::size_t start = 0; start < n; ++start) {
    if (color[start] != white) continue;
    std::vector<std::pair<NodeId, std::size_t>> stack{{static_cast<NodeId>(start), 0}};
    color[start] = grey;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      const auto refs = expr_refs(dag.nodes[v].expr);
      if (next < refs.size()) {
        const NodeId u = refs[next++];
        if (color[u] == grey) {
          cycle_at.insert(u);
        } else if (color[u] == white) {
          color[u] = grey;
          stack.emplace_back(u, 0);
        }
      } else {
        color[v] = black;
        stack.pop_back();
      }
    }
  }
  for (NodeId c : cycle_at) {
    out.push_back({K::cycle, c, "cycle at " + std::to_string(c)});
  }
  return out;
}

std::vector<std::pair<NodeId, NodeId>> edges(const Dag& dag) {
  std::set<std::pair<NodeId, NodeId>> s;
  for (const Node& v : dag.nodes) {
    for (NodeId u : expr_refs(v.expr)) {
      s.emplace(u, v.id);
    }
  }
  return {s.begin(), s.end()};
}

std::vector<NodeId> topo_sort(const Dag& dag, std::optional<std::uint64_t> tie_break_seed) {
  const std::size_t n = dag.nodes.size();
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::vector<NodeId>> children(n);
  for (const Node& v : dag.nodes) {
    std::vector<NodeId> refs = expr_refs(v.expr);
    std::sort(refs.begin(), refs.end());
    refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
    for (NodeId u : refs) {
      if (u >= n) throw DagError("topo_sort: dangling ref " + std::to_string(u));
      children[u].push_back(v.id);
    }
    pending[v.id] = refs.size();
  }
  std::vector<NodeId> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.push_back(static_cast<NodeId>(i));
  }
  std::optional<Rng> rng;
  if (tie_break_seed) rng.emplace(*tie_break_seed);

  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::size_t pick = 0;
    if (rng) {
      pick = rng->index(ready.size());
    } else {
      pick = static_cast<std::size_t>(std::min_element(ready.begin(), ready.end()) - ready.begin());
    }
    const NodeId v = ready[pick];
    // Keep `ready` sorted by insertion so seeded choice is reproducible.
    ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(pick));
    order.push_back(v);
    for (NodeId c : children[v]) {
      if (--pending[c] == 0) ready.push_back(c);
    }
  }
  if (order.size() != n) {
    throw DagError("topo_sort: graph has a cycle");
  }
  return order;
}

std::vector<NodeId> solution_order(const Dag& dag, std::optional<std::uint64_t> tie_break_seed) {
  const auto needed = ancestor_closure(dag, dag.target);
  std::vector<NodeId> out;
  for (NodeId v : topo_sort(dag, tie_break_seed)) {
    if (needed[v]) out.push_back(v);
  }
  return out;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw ArithmeticOverflow("integer overflow in addition");
  return r;
}

std::int64_t checked_sub(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_sub_overflow(a, b, &r)) throw ArithmeticOverflow("integer overflow in subtraction");
  return r;
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw ArithmeticOverflow("integer overflow in product");
  return r;
}

std::int64_t apply_expr(const Expr& e, const std::vector<std::int64_t>& values) {
  auto sum = [&](std::int64_t init, const std::vector<NodeId>& refs) {
    for (NodeId r : refs) init = checked_add(init, values.at(r));
    return init;
  };
  return std::visit(overloaded{
                        [](const expr::Const& x) { return x.k; },
                        [&](const expr::AddK& x) { return sum(x.k, x.refs); },
                        [&](const expr::Sum& x) { return sum(0, x.refs); },
                        [&](const expr::SumChildren& x) { return sum(0, x.refs); },
                        [&](const expr::Diff& x) { return checked_sub(values.at(x.a), values.at(x.b)); },
                        [&](const expr::Scale& x) { return checked_mul(x.k, values.at(x.ref)); },
                        [&](const expr::Mul& x) { return checked_mul(values.at(x.a), values.at(x.b)); },
                        [&](const expr::Square& x) {
                          return checked_mul(values.at(x.ref), values.at(x.ref));
                        },
                    },
                    e);
}

std::vector<std::int64_t> evaluate(const Dag& dag) {
  std::vector<std::int64_t> values(dag.nodes.size(), 0);
  for (NodeId v : topo_sort(dag)) {
    values[v] = apply_expr(dag.nodes[v].expr, values);
  }
  return values;
}

Dag with_values(Dag dag) {
  const auto values = evaluate(dag);
  for (Node& n : dag.nodes) n.value = values[n.id];
  return dag;
}

std::vector<bool> ancestor_closure(const Dag& dag, NodeId root) {
  std::vector<bool> in(dag.nodes.size(), false);
  std::vector<NodeId> stack{root};
  in.at(root) = true;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    for (NodeId u : expr_refs(dag.nodes[v].expr)) {
      if (!in.at(u)) {
        in[u] = true;
        stack.push_back(u);
      }
    }
  }
  return in;
}

Dag classify_roles(Dag dag) {
  const auto needed = ancestor_closure(dag, dag.target);
  for (Node& n : dag.nodes) {
    if (n.id == dag.target) {
      n.role = Role::target;
    } else if (!needed[n.id]) {
      n.role = Role::redundant;
    } else if (expr_refs(n.expr).empty()) {
      n.role = Role::leaf;
    } else {
      n.role = Role::intermediate;
    }
  }
  return dag;
}

int expr_binary_ops(const Expr& e) {
  auto m = [](const std::vector<NodeId>& v) { return static_cast<int>(v.size()); };
  return std::visit(overloaded{
                        [](const expr::Const&) { return 0; },
                        [&](const expr::AddK& x) { return x.k > 0 ? m(x.refs) : m(x.refs) - 1; },
                        [&](const expr::Sum& x) { return m(x.refs) - 1; },
                        [&](const expr::SumChildren& x) { return m(x.refs) - 1; },
                        [](const auto&) { return 1; },
                    },
                    e);
}

int binary_op_count(const Dag& dag) {
  const auto needed = ancestor_closure(dag, dag.target);
  int total = 0;
  for (const Node& n : dag.nodes) {
    if (needed[n.id]) total += expr_binary_ops(n.expr);
  }
  return total;
}

int op_count(const Dag& dag) {
  const auto needed = ancestor_closure(dag, dag.target);
  int total = 0;
  for (const Node& n : dag.nodes) {
    if (needed[n.id]) total += std::max(1, expr_binary_ops(n.expr));
  }
  return total;
}

std::set<NodeId> locked_nodes(const Dag& dag, const std::set<NodeId>& solved) {
  std::set<NodeId> out;
  for (const Node& n : dag.nodes) {
    if (solved.contains(n.id)) continue;
    for (NodeId r : expr_refs(n.expr)) {
      if (!solved.contains(r)) {
        out.insert(n.id);
        break;
      }
    }
  }
  return out;
}

std::set<NodeId> unlocked_nodes(const Dag& dag, const std::set<NodeId>& solved) {
  std::set<NodeId> out;
  const auto locked = locked_nodes(dag, solved);
  for (const Node& n : dag.nodes) {
    if (!solved.contains(n.id) && !locked.contains(n.id)) out.insert(n.id);
  }
  return out;
}

namespace {

// Expression with refs replaced by names; SumChildren refs sorted.
struct NamedExpr {
  std::size_t tag;
  std::int64_t k;
  std::vector<std::string> refs;
  bool operator==(const NamedExpr&) const = default;
};

NamedExpr named(const Dag& dag, const Expr& e) {
  NamedExpr out{e.index(), 0, {}};
  std::visit(overloaded{
                 [&](const expr::Const& x) { out.k = x.k; },
                 [&](const expr::AddK& x) { out.k = x.k; },
                 [&](const expr::Scale& x) { out.k = x.k; },
                 [](const auto&) {},
             },
             e);
  for (NodeId r : expr_refs(e)) out.refs.push_back(dag.at(r).name);
  if (std::holds_alternative<expr::SumChildren>(e)) {
    std::sort(out.refs.begin(), out.refs.end());
  }
  return out;
}

}  // namespace

bool same_structure(const Dag& a, const Dag& b, std::string* why) {
  auto fail = [&](std::string msg) {
    if (why) *why = std::move(msg);
    return false;
  };
  if (a.nodes.size() != b.nodes.size()) {
    return fail("node count " + std::to_string(a.nodes.size()) + " vs " +
                std::to_string(b.nodes.size()));
  }
  if (a.at(a.target).name != b.at(b.target).name) {
    return fail("target '" + a.at(a.target).name + "' vs '" + b.at(b.target).name + "'");
  }
  for (const Node& na : a.nodes) {
    const auto idb = b.find(na.name);
    if (!idb) return fail("node '" + na.name + "' missing");
    const Node& nb = b.at(*idb);
    if (!(named(a, na.expr) == named(b, nb.expr))) return fail("expr differs at '" + na.name + "'");
    if (na.value != nb.value) {
      return fail("value differs at '" + na.name + "': " + std::to_string(na.value) + " vs " +
                  std::to_string(nb.value));
    }
    if (na.layer != nb.layer) return fail("layer tag differs at '" + na.name + "'");
  }
  return true;
}

}  // namespace bridge
