#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bridge/dag.hpp"

namespace bridge::test {

inline Dag make_dag(std::vector<std::pair<std::string, Expr>> specs, NodeId target) {
  Dag dag;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Node n;
    n.id = static_cast<NodeId>(i);
    n.name = std::move(specs[i].first);
    n.expr = std::move(specs[i].second);
    dag.nodes.push_back(std::move(n));
  }
  dag.target = target;
  return dag;
}

// a = 2, b = a + 3, c = 2 * b; target c.
inline Dag chain_abc() {
  using namespace expr;
  return classify_roles(with_values(make_dag({{"a", Const{2}}, {"b", AddK{3, {0}}}, {"c", Scale{2, 1}}}, 2)));
}

}  // namespace bridge::test
