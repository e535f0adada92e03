#include "bridge/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>
#include <filesystem>

#include "bridge/behavior.hpp"
#include "bridge/errors.hpp"
#include "bridge/io.hpp"

namespace bridge {

using nlohmann::json;

void atomic_write_file(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json to_json(const Expr& e) {
  json j = {{"tag", expr_tag(e)}};
  std::visit(
      [&](const auto& x) {
        using E = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<E, expr::Const>) {
          j["k"] = x.k;
        } else if constexpr (std::is_same_v<E, expr::AddK>) {
          j["k"] = x.k;
          j["refs"] = x.refs;
        } else if constexpr (std::is_same_v<E, expr::Sum> || std::is_same_v<E, expr::SumChildren>) {
          j["refs"] = x.refs;
        } else if constexpr (std::is_same_v<E, expr::Diff> || std::is_same_v<E, expr::Mul>) {
          j["a"] = x.a;
          j["b"] = x.b;
        } else if constexpr (std::is_same_v<E, expr::Scale>) {
          j["k"] = x.k;
          j["ref"] = x.ref;
        } else {
          j["ref"] = x.ref;
        }
      },
      e);
  return j;
}

Expr expr_from_json(const json& j) {
  const auto tag = j.at("tag").get<std::string>();
  auto refs = [&] { return j.at("refs").get<std::vector<NodeId>>(); };
  if (tag == "const") return expr::Const{j.at("k").get<std::int64_t>()};
  if (tag == "add_k") return expr::AddK{j.at("k").get<std::int64_t>(), refs()};
  if (tag == "sum") return expr::Sum{refs()};
  if (tag == "sum_children") return expr::SumChildren{refs()};
  if (tag == "diff") return expr::Diff{j.at("a").get<NodeId>(), j.at("b").get<NodeId>()};
  if (tag == "mul") return expr::Mul{j.at("a").get<NodeId>(), j.at("b").get<NodeId>()};
  if (tag == "scale") return expr::Scale{j.at("k").get<std::int64_t>(), j.at("ref").get<NodeId>()};
  if (tag == "square") return expr::Square{j.at("ref").get<NodeId>()};
  throw std::invalid_argument("unknown expression tag '" + tag + "'");
}

json to_json(const Dag& dag) {
  json nodes = json::array();
  for (const Node& n : dag.nodes) {
    json jn = {{"id", n.id}, {"name", n.name}, {"expr", to_json(n.expr)}, {"value", n.value},
               {"role", to_string(n.role)}};
    if (n.layer != LayerTag::none) jn["layer"] = to_string(n.layer);
    nodes.push_back(std::move(jn));
  }
  return {{"target", dag.target}, {"nodes", std::move(nodes)}};
}

Dag dag_from_json(const json& j) {
  Dag dag;
  dag.target = j.at("target").get<NodeId>();
  for (const auto& jn : j.at("nodes")) {
    Node n;
    n.id = jn.at("id").get<NodeId>();
    n.name = jn.at("name").get<std::string>();
    n.expr = expr_from_json(jn.at("expr"));
    n.value = jn.at("value").get<std::int64_t>();
    n.role = role_from_string(jn.at("role").get<std::string>());
    n.layer = jn.contains("layer") ? layer_from_string(jn["layer"].get<std::string>()) : LayerTag::none;
    dag.nodes.push_back(std::move(n));
  }
  return dag;
}

json to_json(const CotStep& s) {
  json j = {{"node", s.node},
            {"alias", s.alias},
            {"kind", s.kind == StepKind::compute ? "compute" : "attempt"},
            {"lead", s.lead},
            {"chain", s.equation_chain}};
  if (s.missing) j["missing"] = *s.missing;
  json b = json::array();
  for (Behavior x : s.behaviors) b.push_back(to_string(x));
  j["behaviors"] = std::move(b);
  return j;
}

CotStep cot_step_from_json(const json& j) {
  CotStep s;
  s.node = j.at("node").get<NodeId>();
  s.alias = j.at("alias").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "compute") {
    s.kind = StepKind::compute;
  } else if (kind == "attempt") {
    s.kind = StepKind::attempt;
  } else {
    throw std::invalid_argument("unknown step kind '" + kind + "'");
  }
  s.lead = j.at("lead").get<int>();
  s.equation_chain = j.at("chain").get<std::vector<std::string>>();
  if (j.contains("missing")) s.missing = j["missing"].get<NodeId>();
  for (const auto& b : j.at("behaviors")) s.behaviors.insert(behavior_from_string(b.get<std::string>()));
  return s;
}

json to_json(const Task& t) {
  json cot = json::array();
  for (const auto& s : t.cot) cot.push_back(to_json(s));
  json difficulty = json::object();
  if (t.meta.op_count) difficulty["op_count"] = *t.meta.op_count;
  if (t.meta.depth) difficulty["depth"] = *t.meta.depth;
  if (t.meta.redundancy) difficulty["redundancy"] = *t.meta.redundancy;
  json behaviors = json::array();
  for (const auto& b : t.meta.behaviors) behaviors.push_back({{"name", to_string(b.behavior)}, {"step", b.step}});
  json meta = {{"difficulty", std::move(difficulty)},
               {"seed", t.meta.seed},
               {"behaviors", std::move(behaviors)},
               {"redundant_premises", t.meta.redundant_premises},
               {"augmentation", t.meta.augmentation}};
  if (!t.meta.categories.empty()) meta["categories"] = t.meta.categories;
  return {{"id", t.id},     {"family", to_string(t.family)}, {"query", t.query},
          {"cot", std::move(cot)}, {"gold", t.gold},        {"dag", to_json(t.dag)},
          {"meta", std::move(meta)}};
}

Task task_from_json(const json& j) {
  Task t;
  t.id = j.at("id").get<std::string>();
  t.family = family_from_string(j.at("family").get<std::string>());
  t.query = j.at("query").get<std::vector<std::string>>();
  for (const auto& s : j.at("cot")) t.cot.push_back(cot_step_from_json(s));
  t.gold = j.at("gold").get<std::int64_t>();
  t.dag = dag_from_json(j.at("dag"));
  const auto& m = j.at("meta");
  const auto& d = m.at("difficulty");
  if (d.contains("op_count")) t.meta.op_count = d["op_count"].get<int>();
  if (d.contains("depth")) t.meta.depth = d["depth"].get<int>();
  if (d.contains("redundancy")) t.meta.redundancy = d["redundancy"].get<int>();
  t.meta.seed = m.at("seed").get<std::uint64_t>();
  for (const auto& b : m.at("behaviors")) {
    t.meta.behaviors.push_back({behavior_from_string(b.at("name").get<std::string>()), b.at("step").get<std::size_t>()});
  }
  t.meta.redundant_premises = m.at("redundant_premises").get<bool>();
  t.meta.augmentation = m.at("augmentation").get<std::string>();
  if (m.contains("categories")) t.meta.categories = m["categories"].get<CategoryTable>();
  return t;
}

std::string dataset_text(const std::vector<Task>& tasks, const json& config) {
  json header = {{"schema", "bridge-dataset"}, {"version", kDatasetVersion}, {"count", tasks.size()}};
  if (!config.is_null()) header["config"] = config;
  std::string out = header.dump() + "\n";
  for (const auto& t : tasks) out += to_json(t).dump() + "\n";
  return out;
}

void write_dataset(const std::vector<Task>& tasks, const std::string& path, const json& config) {
  atomic_write_file(path, dataset_text(tasks, config));
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
  }
  return out;
}

Dataset read_dataset(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (lineno == 1) {
      if (!j.is_object() || j.value("schema", "") != "bridge-dataset") {
        throw ParseError("missing bridge-dataset header", lineno);
      }
      if (j.value("version", 0) != kDatasetVersion) throw ParseError("unsupported dataset version", lineno);
      ds.header = std::move(j);
      continue;
    }
    Task t;
    try {
      t = task_from_json(j);
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad task record: ") + e.what(), lineno);
    }
    if (strict) {
      if (auto why = cot_problem(t)) throw VerificationError(*why, t.id);
    }
    ds.tasks.push_back(std::move(t));
  }
  if (lineno == 0) throw ParseError("empty dataset file", 1);
  return ds;
}

json to_json(const RolloutRecord& r) {
  return {{"query_id", r.query_id},       {"n", r.n},
          {"N", r.N},                     {"rewards", r.rewards},
          {"format_bonus", r.format_bonus}, {"advantage", r.advantages},
          {"grad_ref", r.grad_refs},      {"variant", r.variant},
          {"info_coefficient", r.info_coefficient}};
}

RolloutRecord rollout_from_json(const json& j) {
  RolloutRecord r;
  r.query_id = j.at("query_id").get<std::string>();
  r.rewards = j.at("rewards").get<std::vector<double>>();
  r.N = j.value("N", static_cast<int>(r.rewards.size()));
  int n = 0;
  for (double x : r.rewards) n += x >= 1.0 ? 1 : 0;
  r.n = j.value("n", n);
  r.format_bonus = j.value("format_bonus", std::vector<double>{});
  r.advantages = j.value("advantage", std::vector<double>{});
  r.grad_refs = j.value("grad_ref", std::vector<std::string>{});
  r.variant = j.value("variant", "");
  r.info_coefficient = j.value("info_coefficient", 0.0);
  if (static_cast<int>(r.rewards.size()) != r.N) throw std::invalid_argument("rewards length differs from N");
  if (r.n != n) throw std::invalid_argument("n differs from the number of correct rewards");
  return r;
}

std::string rollouts_text(const std::vector<RolloutRecord>& rs) {
  std::string out;
  for (const auto& r : rs) out += to_json(r).dump() + "\n";
  return out;
}

void write_rollouts(const std::vector<RolloutRecord>& rs, const std::string& path) {
  atomic_write_file(path, rollouts_text(rs));
}

std::vector<RolloutRecord> read_rollouts(const std::string& path) {
  std::vector<RolloutRecord> out;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(rollout_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad rollout record: ") + e.what(), lineno);
    }
  }
  return out;
}

}  // namespace bridge
