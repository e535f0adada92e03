#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace bridge {

// Index of a node inside its Dag; nodes[i].id == i always holds for a valid Dag.
using NodeId = std::uint32_t;

namespace expr {

struct Const {
  std::int64_t k = 0;
  bool operator==(const Const&) const = default;
};

// k more than the sum of refs ("equals 9 more than the sum of ...").
struct AddK {
  std::int64_t k = 0;
  std::vector<NodeId> refs;
  bool operator==(const AddK&) const = default;
};

// Plain sum of refs; a single ref is a copy ("equals each X").
struct Sum {
  std::vector<NodeId> refs;
  bool operator==(const Sum&) const = default;
};

// a - b.
struct Diff {
  NodeId a = 0;
  NodeId b = 0;
  bool operator==(const Diff&) const = default;
};

// k times ref, k >= 2.
struct Scale {
  std::int64_t k = 2;
  NodeId ref = 0;
  bool operator==(const Scale&) const = default;
};

// a * b.
struct Mul {
  NodeId a = 0;
  NodeId b = 0;
  bool operator==(const Mul&) const = default;
};

struct Square {
  NodeId ref = 0;
  bool operator==(const Square&) const = default;
};

// Implicit aggregation of an iGSM abstract node over its instance children.
struct SumChildren {
  std::vector<NodeId> refs;
  bool operator==(const SumChildren&) const = default;
};

}  // namespace expr

using Expr = std::variant<expr::Const, expr::AddK, expr::Sum, expr::Diff, expr::Scale, expr::Mul,
                          expr::Square, expr::SumChildren>;

std::vector<NodeId> expr_refs(const Expr& e);
std::string_view expr_tag(const Expr& e);
// Rewrites every ref through `map` (old id -> new id).
Expr remap_refs(const Expr& e, const std::vector<NodeId>& map);

enum class Role { leaf, intermediate, target, redundant };
enum class LayerTag { none, abstract, instance };

std::string_view to_string(Role r);
std::string_view to_string(LayerTag t);
Role role_from_string(std::string_view s);
LayerTag layer_from_string(std::string_view s);

struct Node {
  NodeId id = 0;
  std::string name;
  Expr expr = expr::Const{};
  std::int64_t value = 0;
  Role role = Role::intermediate;
  LayerTag layer = LayerTag::none;

  bool operator==(const Node&) const = default;
};

struct Dag {
  std::vector<Node> nodes;
  NodeId target = 0;

  std::size_t size() const { return nodes.size(); }
  const Node& at(NodeId id) const { return nodes.at(id); }
  std::optional<NodeId> find(std::string_view name) const;

  bool operator==(const Dag&) const = default;
};

struct Violation {
  enum class Kind { bad_id, dangling_ref, cycle, duplicate_name, bad_target, bad_arity };
  Kind kind;
  NodeId node;
  std::string message;
};

// Empty iff ids are positional, refs resolve, names are unique, arities hold,
// the target exists (and is the only node tagged target), and the graph is acyclic.
std::vector<Violation> validate(const Dag& dag);

// Parent u -> child v iff v's expression references u.
std::vector<std::pair<NodeId, NodeId>> edges(const Dag& dag);

// Linear extension. With a seed, ready nodes are chosen uniformly at random;
// without one, the smallest ready id goes first. Throws DagError on cycles.
std::vector<NodeId> topo_sort(const Dag& dag, std::optional<std::uint64_t> tie_break_seed = {});

// topo_sort restricted to the target's ancestor closure: the order in which a
// canonical solution visits the nodes it needs.
std::vector<NodeId> solution_order(const Dag& dag, std::optional<std::uint64_t> tie_break_seed = {});

// Values indexed by NodeId. Throws ArithmeticOverflow outside int64.
std::vector<std::int64_t> evaluate(const Dag& dag);
// Same evaluation, written back into node.value.
Dag with_values(Dag dag);

// Checked arithmetic shared by evaluation and the equation parser.
std::int64_t checked_add(std::int64_t a, std::int64_t b);
std::int64_t checked_sub(std::int64_t a, std::int64_t b);
std::int64_t checked_mul(std::int64_t a, std::int64_t b);
std::int64_t apply_expr(const Expr& e, const std::vector<std::int64_t>& values);

// Target plus every node it transitively references.
std::vector<bool> ancestor_closure(const Dag& dag, NodeId root);

Dag classify_roles(Dag dag);

// Binary arithmetic operations in one node's expression: AddK m (m-1 when
// k == 0), Sum/SumChildren m-1, Diff/Scale/Mul/Square 1, Const 0.
int expr_binary_ops(const Expr& e);
// Sum of expr_binary_ops over the non-redundant subgraph.
int binary_op_count(const Dag& dag);
// iGSM difficulty: every solution step counts at least one operation,
// multi-operand aggregations count their extra operations.
int op_count(const Dag& dag);

// Nodes outside `solved` that reference at least one unsolved node.
std::set<NodeId> locked_nodes(const Dag& dag, const std::set<NodeId>& solved);
// Unsolved nodes whose references are all solved.
std::set<NodeId> unlocked_nodes(const Dag& dag, const std::set<NodeId>& solved);

// Name-keyed structural equality: same names, expressions (refs compared by
// name, SumChildren as a set), values, layer tags and target. Ids may differ.
bool same_structure(const Dag& a, const Dag& b, std::string* why = nullptr);

}  // namespace bridge
