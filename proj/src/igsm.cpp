#include "bridge/igsm.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "bridge/cot.hpp"
#include "bridge/errors.hpp"
#include "bridge/rng.hpp"

namespace bridge {

IgsmWorld default_igsm_world() {
  IgsmWorld w;
  w.containers = {"Oakwood Middle School",    "Rising Stars Junior High", "Crestview Middle School",
                  "Maple Grove High",         "Riverside Elementary",     "Lincoln Academy",
                  "Summit Ridge School",      "Harbor View Middle School", "Pine Valley High",
                  "Westbrook Elementary"};
  w.categories = {
      {"Classroom",
       {"Pottery Classroom", "Painting Room", "Graphic Design Studio", "Computer Room",
        "Music Room", "Science Lab", "Dance Studio", "Chemistry Lab", "Reading Room",
        "Robotics Workshop"}},
      {"Backpack",
       {"Printed Casual Backpack", "Designer Bag", "Manager Backpack", "Hiking Backpack",
        "Laptop Bag", "School Daypack", "Canvas Tote", "Messenger Bag", "Drawstring Bag",
        "Rolling Backpack"}},
  };
  return w;
}

void validate_world(const IgsmWorld& world) {
  std::set<std::string> seen;
  auto check = [&](const std::string& n, const char* what) {
    if (n.empty()) throw std::invalid_argument(std::string("igsm world: empty ") + what + " name");
    for (const char* bad : {".", ",", "'s ", " and ", " is ", " as ", "\n"}) {
      if (n.find(bad) != std::string::npos) {
        throw std::invalid_argument("igsm world: name '" + n + "' contains '" + bad + "'");
      }
    }
    if (!seen.insert(n).second) throw std::invalid_argument("igsm world: duplicate name '" + n + "'");
  };
  if (world.containers.empty()) throw std::invalid_argument("igsm world: no containers");
  if (world.categories.empty()) throw std::invalid_argument("igsm world: no categories");
  for (const auto& c : world.containers) check(c, "container");
  for (const auto& [cat, inst] : world.categories) {
    check(cat, "category");
    if (inst.empty()) throw std::invalid_argument("igsm world: category '" + cat + "' has no instances");
    for (const auto& i : inst) check(i, "instance");
  }
}

std::vector<std::string> read_name_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open name list: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    std::size_t b = line.find_first_not_of(' ');
    if (b == std::string::npos || line[b] == '#') continue;
    out.push_back(line.substr(b));
  }
  return out;
}

void validate_config(const IgsmConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("igsm config: " + m); };
  if (c.op_range.empty() || c.op_range.hi < 1) fail("op_range must be nonempty and reach 1");
  if (!c.answer_range.contains(0)) fail("answer_range must contain 0");
  if (c.max_regen_attempts == 0) fail("max_regen_attempts must be positive");
  if (c.const_range.empty() || c.addk_range.empty() || c.scale_range.empty()) fail("empty literal range");
  if (c.addk_range.lo < 0) fail("AddK offsets must be >= 0");
  if (c.scale_range.lo < 2) fail("Scale factors must be >= 2");
  if (c.containers < 1 || c.layer_width < 1) fail("containers and layer_width must be positive");
  if (c.children_per_entity.empty() || c.children_per_entity.lo < 1) fail("children_per_entity must be >= 1");
  if (c.max_refs < 1) fail("max_refs must be positive");
  if (c.const_prob < 0 || c.const_prob > 1) fail("const_prob must be in [0, 1]");
  if (c.op_weights.size() != 5) fail("op_weights needs 5 entries (AddK, Sum, Diff, Scale, Mul)");
  double total = 0;
  for (double w : c.op_weights) {
    if (w < 0) fail("negative op weight");
    total += w;
  }
  if (total <= 0) fail("op weights sum to zero");
}

namespace {

struct Proto {
  std::string name;
  LayerTag layer;
  Expr expr = expr::Const{};
  std::vector<std::size_t> members;  // abstract only, indices into protos
};

std::vector<std::string> sample_names(Rng& rng, std::vector<std::string> pool, int k) {
  rng.shuffle(pool);
  pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(k)));
  return pool;
}

std::size_t weighted(Rng& rng, const std::vector<double>& w) {
  double total = 0;
  for (double x : w) total += x;
  double u = rng.uniform01() * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  for (std::size_t i = w.size(); i-- > 0;) {
    if (w[i] > 0) return i;
  }
  return 0;
}

// Picks k distinct entries of `avail`, half the time forcing the newest one
// so long dependency chains are common.
std::vector<NodeId> pick_refs(Rng& rng, const std::vector<NodeId>& avail, std::size_t k) {
  std::vector<NodeId> pool = avail;
  std::vector<NodeId> out;
  if (rng.bernoulli(0.5)) {
    out.push_back(pool.back());
    pool.pop_back();
  }
  rng.shuffle(pool);
  for (std::size_t i = 0; out.size() < k && i < pool.size(); ++i) out.push_back(pool[i]);
  rng.shuffle(out);
  return out;
}

std::optional<Task> attempt_once(const IgsmConfig& cfg, const IgsmWorld& world, Rng& rng) {
  // Structure: entities per layer and their instance children.
  std::vector<Proto> protos;
  std::vector<std::size_t> instance_ids;
  std::vector<std::string> entities = sample_names(rng, world.containers, cfg.containers);
  for (const auto& [category, pool] : world.categories) {
    const auto layer = sample_names(rng, pool, cfg.layer_width);
    std::set<std::string> used;
    for (const auto& e : entities) {
      const auto k = rng.uniform_int(cfg.children_per_entity.lo,
                                     std::min<std::int64_t>(cfg.children_per_entity.hi,
                                                            static_cast<std::int64_t>(layer.size())));
      Proto abstract{e + "'s " + category, LayerTag::abstract, expr::Const{}, {}};
      for (const auto& inst : sample_names(rng, layer, static_cast<int>(k))) {
        abstract.members.push_back(protos.size());
        instance_ids.push_back(protos.size());
        protos.push_back({e + "'s " + inst, LayerTag::instance, expr::Const{}, {}});
        used.insert(inst);
      }
      protos.push_back(std::move(abstract));
    }
    entities.assign(used.begin(), used.end());
    std::sort(entities.begin(), entities.end(), [&](const std::string& a, const std::string& b) {
      return std::find(layer.begin(), layer.end(), a) < std::find(layer.begin(), layer.end(), b);
    });
  }

  // Random dependencies along a shuffled placement order; an abstract node is
  // usable once all its members are placed.
  rng.shuffle(instance_ids);
  std::vector<bool> placed(protos.size(), false);
  std::vector<bool> abstract_ready(protos.size(), false);
  std::vector<NodeId> avail;  // proto indices, in order of availability
  for (std::size_t idx : instance_ids) {
    Proto& p = protos[idx];
    if (avail.empty() || rng.bernoulli(cfg.const_prob)) {
      p.expr = expr::Const{rng.uniform_int(cfg.const_range.lo, cfg.const_range.hi)};
    } else {
      const std::size_t kind = weighted(rng, cfg.op_weights);
      const auto max_refs = std::min<std::size_t>(static_cast<std::size_t>(cfg.max_refs), avail.size());
      switch (kind) {
        case 0: {
          const auto m = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_refs)));
          p.expr = expr::AddK{rng.uniform_int(cfg.addk_range.lo, cfg.addk_range.hi), pick_refs(rng, avail, m)};
          break;
        }
        case 1: {
          const auto m = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_refs)));
          p.expr = expr::Sum{pick_refs(rng, avail, m)};
          break;
        }
        case 2:
        case 4: {
          if (avail.size() < 2) {
            p.expr = expr::Scale{rng.uniform_int(cfg.scale_range.lo, cfg.scale_range.hi), avail.back()};
            break;
          }
          const auto r = pick_refs(rng, avail, 2);
          if (kind == 2) {
            p.expr = expr::Diff{r[0], r[1]};
          } else {
            p.expr = expr::Mul{r[0], r[1]};
          }
          break;
        }
        default:
          p.expr = expr::Scale{rng.uniform_int(cfg.scale_range.lo, cfg.scale_range.hi),
                               pick_refs(rng, avail, 1)[0]};
      }
    }
    placed[idx] = true;
    avail.push_back(static_cast<NodeId>(idx));
    for (std::size_t a = 0; a < protos.size(); ++a) {
      if (protos[a].layer != LayerTag::abstract || abstract_ready[a]) continue;
      if (std::all_of(protos[a].members.begin(), protos[a].members.end(),
                      [&](std::size_t m) { return placed[m]; })) {
        abstract_ready[a] = true;
        std::vector<NodeId> refs(protos[a].members.begin(), protos[a].members.end());
        protos[a].expr = expr::SumChildren{refs};
        avail.push_back(static_cast<NodeId>(a));
      }
    }
  }

  // Full graph over protos (ids = proto index) to evaluate and pick a target.
  Dag full;
  for (std::size_t i = 0; i < protos.size(); ++i) {
    Node n;
    n.id = static_cast<NodeId>(i);
    n.name = protos[i].name;
    n.expr = protos[i].expr;
    n.layer = protos[i].layer;
    full.nodes.push_back(std::move(n));
  }
  std::vector<std::int64_t> values;
  try {
    values = evaluate(full);
  } catch (const ArithmeticOverflow&) {
    return std::nullopt;
  }

  std::vector<NodeId> candidates;
  for (const Node& n : full.nodes) {
    if (expr_refs(n.expr).empty() || !cfg.answer_range.contains(values[n.id])) continue;
    full.target = n.id;
    const int ops = op_count(full);
    if (!cfg.op_range.contains(ops) || ops > 52) continue;
    if (cfg.intermediate_bound) {
      const auto closure = ancestor_closure(full, n.id);
      bool ok = true;
      for (std::size_t i = 0; i < closure.size() && ok; ++i) {
        if (closure[i] && (values[i] > *cfg.intermediate_bound || values[i] < -*cfg.intermediate_bound)) ok = false;
      }
      if (!ok) continue;
    }
    candidates.push_back(n.id);
  }
  // Single-constant tasks (op_range reaching 1) have a Const target.
  if (candidates.empty() && cfg.op_range.contains(1)) {
    for (const Node& n : full.nodes) {
      if (n.layer == LayerTag::instance && expr_refs(n.expr).empty() &&
          cfg.answer_range.contains(values[n.id])) {
        candidates.push_back(n.id);
      }
    }
  }
  if (candidates.empty()) return std::nullopt;
  const NodeId target = rng.pick(candidates);

  // Keep every instance node (each carries a premise) and the abstract nodes
  // something refers to.
  std::vector<bool> keep(protos.size(), false);
  for (std::size_t i = 0; i < protos.size(); ++i) {
    if (protos[i].layer == LayerTag::instance) keep[i] = true;
  }
  keep[target] = true;
  for (const Node& n : full.nodes) {
    if (!keep[n.id]) continue;
    for (NodeId r : expr_refs(n.expr)) keep[r] = true;
  }
  // Abstract nodes only reference instance nodes, so one pass suffices.
  std::vector<NodeId> remap(protos.size(), 0);
  Dag dag;
  for (std::size_t i = 0; i < protos.size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = static_cast<NodeId>(dag.nodes.size());
    Node n = full.nodes[i];
    n.id = remap[i];
    dag.nodes.push_back(std::move(n));
  }
  for (Node& n : dag.nodes) n.expr = remap_refs(n.expr, remap);
  dag.target = remap[target];
  dag = classify_roles(with_values(std::move(dag)));

  Task t;
  t.family = Family::igsm;
  t.dag = std::move(dag);
  t.gold = t.dag.at(t.dag.target).value;
  t.meta.op_count = op_count(t.dag);
  t.meta.categories = world.categories;
  for (const Node& n : t.dag.nodes) {
    if (n.role == Role::redundant && n.layer == LayerTag::instance) t.meta.redundant_premises = true;
  }
  return t;
}

}  // namespace

Task generate_igsm(const IgsmConfig& config, const IgsmWorld& world, std::uint64_t seed) {
  validate_config(config);
  validate_world(world);
  for (std::size_t attempt = 0; attempt < config.max_regen_attempts; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    auto task = attempt_once(config, world, rng);
    if (!task) continue;
    task->id = "igsm-" + std::to_string(seed);
    task->meta.seed = seed;
    task->query = render_query(task->dag, Family::igsm, rng.next());
    const auto order = solution_order(task->dag, rng.next());
    task->cot = render_cot(task->dag, order, Family::igsm, rng.next());
    return *std::move(task);
  }
  throw GenerationError("igsm: no task satisfied op_range [" + std::to_string(config.op_range.lo) + ", " +
                            std::to_string(config.op_range.hi) + "] and the answer filter",
                        config.max_regen_attempts);
}

}  // namespace bridge
