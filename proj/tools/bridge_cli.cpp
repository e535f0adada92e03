#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bridge/behavior.hpp"
#include "bridge/cot.hpp"
#include "bridge/dataset.hpp"
#include "bridge/errors.hpp"
#include "bridge/igsm.hpp"
#include "bridge/influence.hpp"
#include "bridge/io.hpp"
#include "bridge/promptbench.hpp"
#include "bridge/rl.hpp"
#include "bridge/rng.hpp"
#include "bridge/toy_policy.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bridge;

namespace {

constexpr const char* kSeedEnv = "BRIDGE_SEED";

// Checks that fail the command with exit code 1.
class CheckFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t env_seed() {
  const char* s = std::getenv(kSeedEnv);
  if (!s || !*s) return 0;
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string(kSeedEnv) + " is not an unsigned integer: " + s);
  }
}

// Flags override the config file, which overrides defaults. Every resolved
// value is recorded for the output metadata.
class Settings {
 public:
  Settings(std::string command, const std::string& config_path, std::string section)
      : section_(std::move(section)) {
    effective_["command"] = std::move(command);
    if (!config_path.empty()) {
      try {
        file_ = json::parse(read_file(config_path));
      } catch (const json::exception& e) {
        throw std::invalid_argument(config_path + ": " + e.what());
      }
      if (!file_.is_object()) throw std::invalid_argument(config_path + ": config must be an object");
    }
  }

  template <class T>
  T get(const std::string& key, const std::optional<T>& flag, T def, bool echo = true) {
    T v = def;
    if (const json* j = lookup(key)) v = j->get<T>();
    if (flag) v = *flag;
    if (echo) effective_[key] = v;
    return v;
  }

  Range range(const std::string& key, const std::optional<std::string>& flag, Range def) {
    Range r = def;
    if (const json* j = lookup(key)) r = parse_range(*j);
    if (flag) r = parse_range(json(*flag));
    effective_[key] = {r.lo, r.hi};
    return r;
  }

  std::uint64_t seed(const std::optional<std::uint64_t>& flag) { return get<std::uint64_t>("seed", flag, env_seed()); }

  json& effective() { return effective_; }

  static Range parse_range(const json& j) {
    if (j.is_number_integer()) return {j.get<std::int64_t>(), j.get<std::int64_t>()};
    if (j.is_array() && j.size() == 2) return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
    if (j.is_string()) {
      const std::string s = j.get<std::string>();
      const auto dash = s.find('-', 1);
      try {
        if (dash == std::string::npos) return {std::stoll(s), std::stoll(s)};
        return {std::stoll(s.substr(0, dash)), std::stoll(s.substr(dash + 1))};
      } catch (const std::exception&) {
      }
    }
    throw std::invalid_argument("bad range " + j.dump() + " (expected N, \"LO-HI\" or [LO, HI])");
  }

 private:
  const json* lookup(const std::string& key) const {
    if (file_.is_null()) return nullptr;
    if (file_.contains(section_) && file_[section_].is_object() && file_[section_].contains(key)) {
      return &file_[section_][key];
    }
    if (file_.contains(key)) return &file_[key];
    return nullptr;
  }

  std::string section_;
  json file_;
  json effective_ = json::object();
};

// Results land at their own index, so output is independent of `threads`.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

void write_meta(const std::string& out, const json& effective) {
  atomic_write_file(out + ".meta.json", effective.dump(2) + "\n");
}

void verify_all(const std::vector<Task>& tasks) {
  for (const Task& t : tasks) {
    if (auto why = cot_problem(t)) throw VerificationError(*why, t.id);
  }
}

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

// ---- gen ------------------------------------------------------------------

struct GenFlags {
  std::string family;
  std::string config, out;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> op_range, answer_range, redundancy, containers;
  std::optional<int> depth;
};

void run_gen(const GenFlags& f) {
  Settings s("gen " + f.family, f.config, "gen");
  const auto count = s.get<std::size_t>("count", f.count, 100);
  const auto seed = s.seed(f.seed);
  const auto threads = s.get<unsigned>("threads", f.threads, default_threads(), false);
  s.effective()["family"] = f.family;
  s.effective()["per_task_seed"] = "derive_seed(seed, index)";

  std::vector<Task> tasks(count);
  if (f.family == "igsm") {
    IgsmConfig cfg;
    cfg.op_range = s.range("op-range", f.op_range, cfg.op_range);
    cfg.answer_range = s.range("answer-range", f.answer_range, cfg.answer_range);
    IgsmWorld world = default_igsm_world();
    const auto containers = s.get<std::string>("containers", f.containers, "");
    if (!containers.empty()) world.containers = read_name_list(containers);
    validate_config(cfg);
    validate_world(world);
    parallel_for(count, threads, [&](std::size_t i) {
      tasks[i] = generate_igsm(cfg, world, derive_seed(seed, i));
      tasks[i].id = "igsm-" + std::to_string(i);
    });
  } else {
    PbConfig cfg;
    cfg.depth = s.get<int>("depth", f.depth, cfg.depth);
    cfg.redundancy_range = s.range("redundancy", f.redundancy, cfg.redundancy_range);
    cfg.answer_range = s.range("answer-range", f.answer_range, cfg.answer_range);
    validate_config(cfg);
    parallel_for(count, threads, [&](std::size_t i) {
      tasks[i] = generate_pb(cfg, derive_seed(seed, i));
      tasks[i].id = "pb-" + std::to_string(i);
    });
  }
  verify_all(tasks);
  write_dataset(tasks, f.out, s.effective());
  std::cerr << "gen: wrote " << tasks.size() << " tasks to " << f.out << "\n";
}

// ---- augment ----------------------------------------------------------------

struct AugmentFlags {
  std::string kind;
  std::string config, in, out;
  std::optional<double> p;
  std::optional<std::size_t> copies, max_reflections;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void run_augment(const AugmentFlags& f) {
  Settings s("augment " + f.kind, f.config, "augment");
  const auto p = s.get<double>("p", f.p, 0.1);
  const auto copies = s.get<std::size_t>("copies", f.copies, 1);
  const auto seed = s.seed(f.seed);
  const auto cap = s.get<std::size_t>("max-reflections", f.max_reflections, 0);
  const auto threads = s.get<unsigned>("threads", f.threads, default_threads(), false);
  if (p < 0 || p > 1) throw std::invalid_argument("--p must lie in [0, 1]");
  if (copies == 0) throw std::invalid_argument("--copies must be positive");
  s.effective()["kind"] = f.kind;
  s.effective()["input"] = fs::path(f.in).filename().string();

  const Dataset in = read_dataset(f.in, true);
  std::vector<std::vector<Task>> per(in.tasks.size());
  parallel_for(in.tasks.size(), threads, [&](std::size_t i) {
    const Task& t = in.tasks[i];
    if (f.kind == "bridge") {
      for (std::size_t c = 0; c < copies; ++c) {
        InjectConfig ic;
        ic.p = p;
        ic.seed = derive_seed(seed, i * copies + c);
        if (cap > 0) ic.max_reflections = cap;
        Task a = bridge_augment(t, ic);
        if (copies > 1) a.id += "-b" + std::to_string(c);
        per[i].push_back(std::move(a));
      }
    } else if (f.kind == "pp") {
      per[i] = pp_aug(t, copies, derive_seed(seed, i));
    } else {
      per[i] = rc_aug(t, copies, derive_seed(seed, i));
    }
  });
  std::vector<Task> out;
  for (auto& v : per) {
    for (auto& t : v) out.push_back(std::move(t));
  }
  verify_all(out);
  write_dataset(out, f.out, s.effective());
  std::cerr << "augment " << f.kind << ": wrote " << out.size() << " tasks to " << f.out << "\n";
}

// ---- filter -----------------------------------------------------------------

void run_filter(const std::string& rollouts, const std::string& in, const std::string& out) {
  std::map<std::string, std::pair<int, int>> counts;
  for (const auto& r : read_rollouts(rollouts)) counts[r.query_id] = {r.n, r.N};
  const auto keep = rejection_filter(counts);
  const Dataset ds = read_dataset(in, true);
  std::vector<Task> kept;
  for (const Task& t : ds.tasks) {
    if (keep.count(t.id)) kept.push_back(t);
  }
  json meta = {{"command", "filter reject"},
               {"rollouts", fs::path(rollouts).filename().string()},
               {"input", fs::path(in).filename().string()},
               {"kept", kept.size()},
               {"dropped", ds.tasks.size() - kept.size()}};
  write_dataset(kept, out, meta);
  std::cerr << "filter reject: kept " << kept.size() << " of " << ds.tasks.size() << " tasks\n";
}

// ---- sft-export -------------------------------------------------------------

void run_sft_export(const std::string& in, const std::string& family, const std::string& out) {
  const Dataset ds = read_dataset(in, true);
  std::vector<json> rows;
  for (const Task& t : ds.tasks) {
    rows.push_back({{"id", t.id}, {"gold", t.gold}, {"text", render_sft_record(t, family)}});
  }
  atomic_write_file(out, jsonl(rows));
  write_meta(out, {{"command", "sft-export"},
                   {"input", fs::path(in).filename().string()},
                   {"template-family", family},
                   {"count", rows.size()}});
  std::cerr << "sft-export: wrote " << rows.size() << " records to " << out << "\n";
}

// ---- score / advantage ------------------------------------------------------

void run_score(const std::string& outputs, const std::string& gold, bool bonus, const std::string& out) {
  const Dataset ds = read_dataset(gold, false);
  std::map<std::string, std::int64_t> gold_of;
  for (const Task& t : ds.tasks) gold_of[t.id] = t.gold;
  std::vector<RolloutRecord> records;
  std::map<std::string, std::size_t> slot;
  const auto rows = read_jsonl(outputs);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& row = rows[i];
    if (!row.contains("query_id") || !row.contains("text")) {
      throw ParseError("output record needs query_id and text", i + 1);
    }
    const auto qid = row.at("query_id").get<std::string>();
    const auto it = gold_of.find(qid);
    if (it == gold_of.end()) throw ParseError("unknown query_id " + qid, i + 1);
    auto [pos, fresh] = slot.try_emplace(qid, records.size());
    if (fresh) {
      records.emplace_back();
      records.back().query_id = qid;
    }
    RolloutRecord& r = records[pos->second];
    const std::string text = row.at("text").get<std::string>();
    const double correct = outcome_reward(text, it->second, false);
    r.rewards.push_back(correct);
    r.format_bonus.push_back(bonus ? outcome_reward(text, it->second, true) - correct : 0.0);
    r.grad_refs.push_back(row.value("grad_ref", ""));
  }
  for (auto& r : records) {
    r.N = static_cast<int>(r.rewards.size());
    r.n = static_cast<int>(std::count(r.rewards.begin(), r.rewards.end(), 1.0));
    if (std::all_of(r.grad_refs.begin(), r.grad_refs.end(), [](const std::string& s) { return s.empty(); })) {
      r.grad_refs.clear();
    }
  }
  write_rollouts(records, out);
  write_meta(out, {{"command", "score"}, {"format-bonus", bonus}, {"groups", records.size()}});
  std::cerr << "score: wrote " << records.size() << " groups to " << out << "\n";
}

void run_advantage(const std::string& rewards, const std::string& variant_text, const std::string& out) {
  const VariantSpec v = parse_variant(variant_text);
  std::vector<RolloutRecord> kept;
  for (auto r : read_rollouts(rewards)) {
    if (r.N < 2 || static_cast<std::size_t>(r.N) != r.rewards.size()) {
      throw std::invalid_argument("group " + r.query_id + " needs N >= 2 rewards");
    }
    if (v.variant == Variant::dapo && (r.n == 0 || r.n == r.N)) continue;
    std::vector<double> total = r.rewards;
    for (std::size_t i = 0; i < total.size() && i < r.format_bonus.size(); ++i) total[i] += r.format_bonus[i];
    r.advantages = group_advantages(total, v);
    r.variant = to_string(v);
    r.info_coefficient = info_coefficient(static_cast<double>(r.n) / r.N, v);
    kept.push_back(std::move(r));
  }
  if (out.empty()) {
    std::cout << rollouts_text(kept);
    return;
  }
  write_rollouts(kept, out);
  write_meta(out, {{"command", "advantage"}, {"variant", to_string(v)}, {"groups", kept.size()}});
}

// ---- influence --------------------------------------------------------------

struct InfluenceFlags {
  std::string grads, rollouts, out, config;
  std::optional<std::size_t> project;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<unsigned> threads;
};

void run_influence(const InfluenceFlags& f) {
  Settings s("influence", f.config, "influence");
  const auto out_dim = s.get<std::size_t>("project", f.project, 8192);
  const auto seed = s.seed(f.seed);
  const VariantSpec v = parse_variant(s.get<std::string>("variant", f.variant, "grpo"));
  const auto threads = s.get<unsigned>("threads", f.threads, default_threads(), false);

  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(f.grads)) {
    if (e.is_regular_file() && e.path().extension() == ".grad") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  std::vector<GradVector> grads(names.size());
  parallel_for(names.size(), threads, [&](std::size_t i) { grads[i] = read_grad((fs::path(f.grads) / names[i]).string()); });

  if (!f.rollouts.empty()) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
    std::vector<bool> seen(names.size(), false);
    for (const auto& r : read_rollouts(f.rollouts)) {
      if (r.grad_refs.size() != r.rewards.size()) throw std::invalid_argument("group " + r.query_id + " lacks grad_ref entries");
      std::vector<double> total = r.rewards;
      for (std::size_t i = 0; i < total.size() && i < r.format_bonus.size(); ++i) total[i] += r.format_bonus[i];
      const auto adv = r.advantages.size() == total.size() ? r.advantages : group_advantages(total, v);
      for (std::size_t i = 0; i < r.grad_refs.size(); ++i) {
        const auto it = index.find(fs::path(r.grad_refs[i]).filename().string());
        if (it == index.end()) throw std::invalid_argument("missing gradient file " + r.grad_refs[i]);
        GradVector& g = grads[it->second];
        g.query_id = r.query_id;
        g.correct = r.rewards[i] == 1.0;
        g.advantage = adv[i];
        seen[it->second] = true;
      }
    }
    std::vector<GradVector> used;
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (seen[i]) used.push_back(std::move(grads[i]));
    }
    grads = std::move(used);
  }
  if (grads.empty()) throw std::invalid_argument("no gradients to report on");
  if (out_dim > 0) {
    if (out_dim >= grads[0].dim()) {
      throw std::invalid_argument("--project " + std::to_string(out_dim) + " must be below the gradient dimension " +
                                  std::to_string(grads[0].dim()) + " (0 keeps raw gradients)");
    }
    grads = project_batch(grads, ProjectionSpec{seed, grads[0].dim(), out_dim}, threads);
  }
  const auto rows = grouped_influence_report(grads, v);
  atomic_write_file(f.out, report_csv(rows));
  s.effective()["gradients"] = grads.size();
  write_meta(f.out, s.effective());
  for (const auto& r : rows) {
    if ((r.n == 0 || r.n == r.N) && r.mean_influence != 0.0) {
      throw CheckFailure("degenerate bucket " + r.label() + " has nonzero influence");
    }
  }
  std::cerr << "influence: " << grads.size() << " gradients, report in " << f.out << "\n";
}

// ---- toy ----------------------------------------------------------------------

struct ToyFlags {
  std::string mode;
  std::string config, in, out, policy, grads_out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps, tasks, rollouts, max_len, instances, sft_steps;
  std::optional<double> lr, eta, beta, temperature;
  std::optional<std::string> variant;
  std::optional<unsigned> threads;
};

void emit(const json& j) { std::cout << j.dump() << "\n"; }

std::vector<ToyTask> toy_tasks(const std::string& in, std::size_t count, std::uint64_t seed) {
  std::vector<ToyTask> out;
  if (!in.empty()) {
    for (const Task& t : read_dataset(in, false).tasks) out.push_back(toy_task_from(t));
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(make_toy_task(derive_seed(seed, i)));
  }
  if (out.empty()) throw std::invalid_argument("no toy tasks");
  return out;
}

std::vector<std::pair<Tokens, Tokens>> sft_pairs(const std::vector<ToyTask>& ts) {
  std::vector<std::pair<Tokens, Tokens>> out;
  for (const auto& t : ts) out.emplace_back(t.prompt, t.answer);
  return out;
}

ToyPolicy train_sft(const std::vector<ToyTask>& ts, std::size_t steps, double lr, std::uint64_t seed, bool log) {
  ToyPolicy p = ToyPolicy::random(kToyVocab, 0.3, seed, kToyEos);
  p.lineage = {seed};
  const auto batch = sft_pairs(ts);
  for (std::size_t s = 0; s < steps; ++s) {
    p = sft_step(p, batch, lr);
    if (log) emit({{"step", s + 1}, {"mean_nll", mean_nll(p, batch)}, {"perplexity", policy_perplexity(p, batch)}});
  }
  p.lineage.push_back(steps);
  return p;
}

void toy_sft(const ToyFlags& f, Settings& s) {
  const auto seed = s.seed(f.seed);
  const auto ts = toy_tasks(f.in, s.get<std::size_t>("tasks", f.tasks, 16), seed);
  const ToyPolicy p =
      train_sft(ts, s.get<std::size_t>("steps", f.steps, 200), s.get<double>("lr", f.lr, 0.5), seed, true);
  if (!f.out.empty()) {
    save_policy(p, f.out);
    write_meta(f.out, s.effective());
  }
}

void toy_rollouts(const ToyFlags& f, Settings& s) {
  if (f.policy.empty() || f.in.empty() || f.grads_out.empty() || f.out.empty()) {
    throw std::invalid_argument("toy rollouts needs --policy, --in, --grads-out and --out");
  }
  const auto seed = s.seed(f.seed);
  const auto N = s.get<std::size_t>("rollouts", f.rollouts, 8);
  const auto temperature = s.get<double>("temperature", f.temperature, 1.0);
  const auto max_len = s.get<std::size_t>("max-len", f.max_len, 6);
  const VariantSpec v = parse_variant(s.get<std::string>("variant", f.variant, "grpo"));
  const auto threads = s.get<unsigned>("threads", f.threads, default_threads(), false);
  const ToyPolicy p = load_policy(f.policy);
  const auto ts = toy_tasks(f.in, 0, seed);
  fs::create_directories(f.grads_out);

  std::vector<RolloutRecord> records(ts.size());
  parallel_for(ts.size(), threads, [&](std::size_t i) {
    const ToyTask& t = ts[i];
    const RolloutGroup g = toy_rollout_group(p, t, N, temperature, max_len, derive_seed(seed, i), v);
    RolloutRecord& r = records[i];
    r.query_id = t.task.id;
    r.n = g.n;
    r.N = g.N;
    r.rewards = g.rewards;
    r.format_bonus.assign(g.rewards.size(), 0.0);
    r.advantages = g.advantages;
    r.variant = to_string(v);
    r.info_coefficient = info_coefficient(g.alpha, v);
    for (std::size_t j = 0; j < N; ++j) {
      char name[48];
      std::snprintf(name, sizeof name, "%06zu-%03zu.grad", i, j);
      GradVector gv;
      gv.values = grad_logprob(p, t.prompt, g.outputs[j]);
      gv.query_id = t.task.id;
      gv.sample_id = t.task.id + "/" + std::to_string(j);
      gv.advantage = g.advantages[j];
      gv.correct = g.rewards[j] == 1.0;
      write_grad((fs::path(f.grads_out) / name).string(), gv);
      r.grad_refs.push_back(name);
    }
  });
  write_rollouts(records, f.out);
  s.effective()["policy_fingerprint"] = p.fingerprint();
  write_meta(f.out, s.effective());
  std::cerr << "toy rollouts: " << records.size() << " groups of " << N << "\n";
}

void toy_grpo(const ToyFlags& f, Settings& s) {
  const auto seed = s.seed(f.seed);
  const auto ts = toy_tasks(f.in, s.get<std::size_t>("tasks", f.tasks, 8), seed);
  GrpoConfig cfg;
  cfg.N = static_cast<int>(s.get<std::size_t>("rollouts", f.rollouts, 8));
  cfg.eta = s.get<double>("eta", f.eta, 0.5);
  cfg.beta = s.get<double>("beta", f.beta, 0.001);
  cfg.variant = parse_variant(s.get<std::string>("variant", f.variant, "grpo"));
  validate(cfg);
  const auto steps = s.get<std::size_t>("steps", f.steps, 100);
  const auto temperature = s.get<double>("temperature", f.temperature, 1.0);
  const auto max_len = s.get<std::size_t>("max-len", f.max_len, 4);
  const ToyPolicy ref =
      train_sft(ts, s.get<std::size_t>("sft-steps", f.sft_steps, 10), s.get<double>("lr", f.lr, 0.5), seed, false);

  auto greedy_accuracy = [&](const ToyPolicy& p) {
    double acc = 0;
    for (const auto& t : ts) acc += toy_reward(t, sample_group(p, t.prompt, 1, 0.0, max_len, 0)[0]);
    return acc / static_cast<double>(ts.size());
  };
  emit({{"event", "start"}, {"greedy_accuracy", greedy_accuracy(ref)}, {"config", s.effective()}});
  ToyPolicy p = ref;
  for (std::size_t step = 0; step < steps; ++step) {
    const ToyTask& t = ts[step % ts.size()];
    const RolloutGroup g = toy_rollout_group(p, t, static_cast<std::size_t>(cfg.N), temperature, max_len,
                                             derive_seed(seed, 1'000'000 + step), cfg.variant);
    const ToyPolicy next = grpo_step(p, g, cfg, &ref);
    if (cfg.beta == 0.0 && (g.n == 0 || g.n == g.N) && next.theta() != p.theta()) {
      throw CheckFailure("degenerate group changed the policy at step " + std::to_string(step));
    }
    emit({{"step", step + 1},
          {"query", t.task.id},
          {"n", g.n},
          {"N", g.N},
          {"alpha", g.alpha},
          {"info_coefficient", info_coefficient(g.alpha, cfg.variant)},
          {"kl_k3", kl_k3(p, ref, g.prompt, g.outputs)},
          {"entropy", policy_entropy(p, g.prompt, g.outputs)}});
    p = next;
  }
  emit({{"event", "end"}, {"greedy_accuracy", greedy_accuracy(p)}});
}

// Policy with most of its mass near the task's answer, so rollouts mix.
ToyPolicy primed(const ToyTask& t, std::uint64_t seed) {
  ToyPolicy p = ToyPolicy::random(kToyVocab, 0.3, seed, kToyEos);
  for (int i = 0; i < 6; ++i) p = sft_step(p, {{t.prompt, t.answer}}, 0.5);
  return p;
}

RolloutGroup mixed(const ToyPolicy& p, const ToyTask& t, std::size_t N, std::uint64_t seed) {
  for (std::uint64_t s = seed; s < seed + 10'000; ++s) {
    RolloutGroup g = toy_rollout_group(p, t, N, 1.0, 4, s);
    if (g.n > 0 && g.n < g.N) return g;
  }
  throw std::runtime_error("no mixed-accuracy group for " + t.task.id);
}

void toy_check_taylor(const ToyFlags& f, Settings& s) {
  const auto seed = s.seed(f.seed);
  double eta = s.get<double>("eta", f.eta, 0.05);
  const auto halvings = s.get<std::size_t>("steps", f.steps, 4);
  const auto N = s.get<std::size_t>("rollouts", f.rollouts, 8);
  const ToyTask t = make_toy_task(seed);
  const ToyPolicy p = primed(t, seed);
  const RolloutGroup train = mixed(p, t, N, derive_seed(seed, 1));
  std::vector<RolloutGroup> targets;
  for (std::uint64_t k = 0; k < 3; ++k) targets.push_back(mixed(p, make_toy_task(derive_seed(seed, 10 + k)), N, derive_seed(seed, 20 + k)));
  auto err_at = [&](double e) {
    const auto r = taylor_influence_check(p, train, targets, e);
    emit({{"eta", e}, {"predicted", r.predicted}, {"actual", r.actual}, {"error", std::abs(r.actual - r.predicted)}});
    return std::abs(r.actual - r.predicted);
  };
  double prev = err_at(eta);
  bool ok = true;
  for (std::size_t h = 0; h < halvings; ++h) {
    eta /= 2;
    const double err = err_at(eta);
    const double ratio = prev / err;
    const bool pass = ratio >= 2.8 && ratio <= 5.5;
    ok = ok && pass;
    emit({{"halving", h + 1}, {"ratio", ratio}, {"pass", pass}});
    prev = err;
  }
  if (!ok) throw CheckFailure("Taylor error ratio outside [2.8, 5.5]");
}

void toy_check_prop1(const ToyFlags& f, Settings& s) {
  const auto seed = s.seed(f.seed);
  const auto instances = s.get<std::size_t>("instances", f.instances, 20);
  const auto N = s.get<std::size_t>("rollouts", f.rollouts, 8);
  const VariantSpec v = parse_variant(s.get<std::string>("variant", f.variant, "grpo"));
  double worst = 0;
  bool ok = true;
  for (std::size_t k = 0; k < instances; ++k) {
    const ToyTask t = make_toy_task(derive_seed(seed, k));
    const ToyPolicy p = primed(t, derive_seed(seed, 100 + k));
    const RolloutGroup train = toy_rollout_group(p, t, N, 1.0, 4, derive_seed(seed, 200 + k), v);
    const RolloutGroup target = mixed(p, make_toy_task(derive_seed(seed, 300 + k)), N, derive_seed(seed, 400 + k));
    std::vector<std::vector<double>> tg, qg;
    for (const auto& o : train.outputs) tg.push_back(grad_logprob(p, train.prompt, o));
    for (const auto& o : target.outputs) qg.push_back(grad_logprob(p, target.prompt, o));
    const std::vector<GradView> tv(tg.begin(), tg.end()), qv(qg.begin(), qg.end());
    std::vector<bool> correct;
    for (double r : train.rewards) correct.push_back(r == 1.0);
    const double grouped = per_step_influence(tv, correct, qv, target.advantages, 1.0, v);
    const double raw = per_step_influence_raw(tv, train.advantages, qv, target.advantages, 1.0);
    const double rel = std::abs(grouped - raw) / std::max(1.0, std::abs(raw));
    const bool degenerate = train.n == 0 || train.n == train.N;
    const bool pass = degenerate ? grouped == 0.0 : rel <= 1e-10;
    ok = ok && pass;
    worst = std::max(worst, rel);
    emit({{"instance", k}, {"n", train.n}, {"N", train.N}, {"grouped", grouped}, {"raw", raw}, {"rel_error", rel}, {"pass", pass}});
  }
  emit({{"max_rel_error", worst}});
  if (!ok) throw CheckFailure("grouped and raw influence disagree");
}

void run_toy(const ToyFlags& f) {
  Settings s("toy " + f.mode, f.config, "toy");
  if (f.mode == "sft") return toy_sft(f, s);
  if (f.mode == "rollouts") return toy_rollouts(f, s);
  if (f.mode == "grpo") return toy_grpo(f, s);
  if (f.mode == "check-taylor") return toy_check_taylor(f, s);
  return toy_check_prop1(f, s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-injection data tools: generation, augmentation, scoring and influence reports"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* g = app.add_subcommand("gen", "Generate a dataset");
  g->add_option("family", gen.family)->required()->check(CLI::IsMember({"igsm", "pb"}));
  g->add_option("--config", gen.config, "JSON config file")->check(CLI::ExistingFile);
  g->add_option("--count", gen.count);
  g->add_option("--seed", gen.seed, std::string("Corpus seed (default $") + kSeedEnv + " or 0)");
  g->add_option("--out", gen.out)->required();
  g->add_option("--threads", gen.threads);
  g->add_option("--op-range", gen.op_range, "igsm: op count range, e.g. 15-20");
  g->add_option("--answer-range", gen.answer_range);
  g->add_option("--containers", gen.containers, "igsm: container name list file");
  g->add_option("--depth", gen.depth, "pb: reasoning depth");
  g->add_option("--redundancy", gen.redundancy, "pb: redundant subtree count or range, e.g. 0-8");

  AugmentFlags aug;
  auto* a = app.add_subcommand("augment", "Augment CoTs (bridge, premise permutation, reasoning-order copies)");
  a->add_option("kind", aug.kind)->required()->check(CLI::IsMember({"bridge", "pp", "rc"}));
  a->add_option("--config", aug.config)->check(CLI::ExistingFile);
  a->add_option("--p", aug.p, "bridge: analysis/reflection probability");
  a->add_option("--copies", aug.copies);
  a->add_option("--max-reflections", aug.max_reflections, "bridge: cap per CoT (0 = unlimited)");
  a->add_option("--seed", aug.seed);
  a->add_option("--threads", aug.threads);
  a->add_option("--in", aug.in)->required()->check(CLI::ExistingFile);
  a->add_option("--out", aug.out)->required();

  std::string filter_kind, filter_rollouts, filter_in, filter_out;
  auto* fl = app.add_subcommand("filter", "Rejection-sampling filter");
  fl->add_option("kind", filter_kind)->required()->check(CLI::IsMember({"reject"}));
  fl->add_option("--rollouts", filter_rollouts)->required()->check(CLI::ExistingFile);
  fl->add_option("--in", filter_in)->required()->check(CLI::ExistingFile);
  fl->add_option("--out", filter_out)->required();

  std::string sft_in, sft_family = "qwen", sft_out;
  auto* sx = app.add_subcommand("sft-export", "Render SFT records");
  sx->add_option("--in", sft_in)->required()->check(CLI::ExistingFile);
  sx->add_option("--template-family", sft_family)->check(CLI::IsMember({"qwen", "llama", "plain"}));
  sx->add_option("--out", sft_out)->required();

  std::string score_outputs, score_gold, score_out;
  bool score_bonus = false;
  auto* sc = app.add_subcommand("score", "Score model outputs into a rollout table");
  sc->add_option("--outputs", score_outputs, "JSONL of {query_id, text, grad_ref?}")->required()->check(CLI::ExistingFile);
  sc->add_option("--gold", score_gold)->required()->check(CLI::ExistingFile);
  sc->add_flag("--format-bonus", score_bonus);
  sc->add_option("--out", score_out)->required();

  std::string adv_rewards, adv_variant = "grpo", adv_out;
  auto* ad = app.add_subcommand("advantage", "Group advantages for a rollout table");
  ad->add_option("--rewards", adv_rewards)->required()->check(CLI::ExistingFile);
  ad->add_option("--variant", adv_variant, "grpo, drgrpo, gpg:C or dapo");
  ad->add_option("--out", adv_out, "Output table (stdout when omitted)");

  InfluenceFlags inf;
  auto* in = app.add_subcommand("influence", "Grouped per-step influence report");
  in->add_option("--grads", inf.grads)->required()->check(CLI::ExistingDirectory);
  in->add_option("--rollouts", inf.rollouts)->check(CLI::ExistingFile);
  in->add_option("--project", inf.project, "Projection dimension (0 = raw gradients)");
  in->add_option("--seed", inf.seed);
  in->add_option("--variant", inf.variant);
  in->add_option("--threads", inf.threads);
  in->add_option("--config", inf.config)->check(CLI::ExistingFile);
  in->add_option("--out", inf.out)->required();

  ToyFlags toy;
  auto* ty = app.add_subcommand("toy", "Toy softmax policy experiments and checks");
  ty->add_option("mode", toy.mode)
      ->required()
      ->check(CLI::IsMember({"sft", "rollouts", "grpo", "check-taylor", "check-prop1"}));
  ty->add_option("--config", toy.config)->check(CLI::ExistingFile);
  ty->add_option("--seed", toy.seed);
  ty->add_option("--in", toy.in, "Dataset whose final computations become toy tasks");
  ty->add_option("--out", toy.out);
  ty->add_option("--policy", toy.policy);
  ty->add_option("--grads-out", toy.grads_out);
  ty->add_option("--steps", toy.steps);
  ty->add_option("--sft-steps", toy.sft_steps);
  ty->add_option("--tasks", toy.tasks);
  ty->add_option("--rollouts", toy.rollouts);
  ty->add_option("--max-len", toy.max_len);
  ty->add_option("--instances", toy.instances);
  ty->add_option("--lr", toy.lr);
  ty->add_option("--eta", toy.eta);
  ty->add_option("--beta", toy.beta);
  ty->add_option("--temperature", toy.temperature);
  ty->add_option("--variant", toy.variant);
  ty->add_option("--threads", toy.threads);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) run_gen(gen);
    if (*a) run_augment(aug);
    if (*fl) run_filter(filter_rollouts, filter_in, filter_out);
    if (*sx) run_sft_export(sft_in, sft_family, sft_out);
    if (*sc) run_score(score_outputs, score_gold, score_bonus, score_out);
    if (*ad) run_advantage(adv_rewards, adv_variant, adv_out);
    if (*in) run_influence(inf);
    if (*ty) run_toy(toy);
  } catch (const VerificationError& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return 1;
  } catch (const CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
