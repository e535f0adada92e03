#include "bridge/promptbench.hpp"

#include <stdexcept>

#include "bridge/cot.hpp"
#include "bridge/errors.hpp"
#include "bridge/rng.hpp"

namespace bridge {

std::string_view to_string(PbOp op) {
  switch (op) {
    case PbOp::add: return "add";
    case PbOp::sub: return "sub";
    case PbOp::mul: return "mul";
    case PbOp::square: return "square";
  }
  return "add";
}

PbOp pb_op_from_string(std::string_view s) {
  if (s == "add") return PbOp::add;
  if (s == "sub") return PbOp::sub;
  if (s == "mul") return PbOp::mul;
  if (s == "square") return PbOp::square;
  throw std::invalid_argument("unknown promptbench operator: " + std::string(s));
}

void validate_config(const PbConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("pb config: " + m); };
  if (c.depth < 1) fail("depth must be >= 1");
  if (c.redundancy_range.empty() || c.redundancy_range.lo < 0) fail("bad redundancy_range");
  if (c.leaf_values.empty()) fail("leaf_values must be nonempty");
  if (!c.answer_range.contains(0)) fail("answer_range must contain 0");
  if (c.operators.empty() && c.depth > 1) fail("operators must be nonempty");
  if (c.max_redundant_depth < 1) fail("max_redundant_depth must be >= 1");
  if (c.max_regen_attempts == 0) fail("max_regen_attempts must be positive");
}

std::string pb_name(std::size_t index) {
  if (index >= 26 * 26 * 26) throw std::out_of_range("pb_name: more than 17576 nodes");
  std::string s(3, 'a');
  for (int i = 2; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = static_cast<char>('a' + index % 26);
    index /= 26;
  }
  return s;
}

namespace {

struct Builder {
  const PbConfig& cfg;
  Rng& rng;
  Dag dag;

  NodeId add(Expr e) {
    Node n;
    n.id = static_cast<NodeId>(dag.nodes.size());
    n.name = pb_name(n.id);
    n.expr = std::move(e);
    dag.nodes.push_back(std::move(n));
    return dag.nodes.back().id;
  }

  // Post-order, so children get earlier names than their parent.
  NodeId tree(int depth) {
    if (depth == 1) return add(expr::Const{rng.pick(cfg.leaf_values)});
    switch (rng.pick(cfg.operators)) {
      case PbOp::square:
        return add(expr::Square{tree(depth - 1)});
      case PbOp::add: {
        const NodeId a = tree(depth - 1);
        const NodeId b = tree(depth - 1);
        return add(expr::Sum{{a, b}});
      }
      case PbOp::sub: {
        const NodeId a = tree(depth - 1);
        const NodeId b = tree(depth - 1);
        return add(expr::Diff{a, b});
      }
      case PbOp::mul: {
        const NodeId a = tree(depth - 1);
        const NodeId b = tree(depth - 1);
        return add(expr::Mul{a, b});
      }
    }
    throw std::logic_error("unreachable");
  }
};

}  // namespace

Task generate_pb(const PbConfig& config, std::uint64_t seed) {
  validate_config(config);
  for (std::size_t attempt = 0; attempt < config.max_regen_attempts; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    Builder b{config, rng, {}};
    const NodeId root = b.tree(config.depth);
    const auto redundancy = rng.uniform_int(config.redundancy_range.lo, config.redundancy_range.hi);
    for (std::int64_t i = 0; i < redundancy; ++i) {
      b.tree(static_cast<int>(rng.uniform_int(1, std::min(config.max_redundant_depth, config.depth))));
    }
    b.dag.target = root;
    Dag dag;
    try {
      dag = classify_roles(with_values(std::move(b.dag)));
    } catch (const ArithmeticOverflow&) {
      continue;
    }
    if (!config.answer_range.contains(dag.at(root).value)) continue;

    Task t;
    t.id = "pb-" + std::to_string(seed);
    t.family = Family::promptbench;
    t.dag = std::move(dag);
    t.gold = t.dag.at(root).value;
    t.meta.depth = config.depth;
    t.meta.redundancy = static_cast<int>(redundancy);
    t.meta.redundant_premises = redundancy > 0;
    t.meta.seed = seed;
    t.query = render_query(t.dag, t.family, rng.next());
    t.cot = render_cot(t.dag, solution_order(t.dag, rng.next()), t.family, rng.next());
    return t;
  }
  throw GenerationError("promptbench: answer filter rejected every draw at depth " +
                            std::to_string(config.depth),
                        config.max_regen_attempts);
}

}  // namespace bridge
