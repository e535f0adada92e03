#include "bridge/toy_policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bridge/io.hpp"
#include "bridge/promptbench.hpp"
#include "bridge/rng.hpp"

namespace bridge {

ToyPolicy::ToyPolicy(int vocab, int eos) : V_(vocab), eos_(eos) {
  if (vocab < 1 || vocab > 64) throw std::invalid_argument("toy policy: vocab must be in [1, 64]");
  if (eos >= vocab) throw std::invalid_argument("toy policy: eos outside vocab");
  theta_.assign(static_cast<std::size_t>(vocab + 1) * static_cast<std::size_t>(vocab), 0.0);
}

ToyPolicy ToyPolicy::random(int vocab, double scale, std::uint64_t seed, int eos) {
  ToyPolicy p(vocab, eos);
  Rng rng(seed);
  for (double& x : p.theta_) x = scale * rng.normal();
  p.lineage = {seed};
  return p;
}

std::vector<double> ToyPolicy::probs(int row, double temperature) const {
  if (row < 0 || row > V_) throw std::out_of_range("toy policy: bad context row");
  if (!(temperature > 0)) throw std::invalid_argument("toy policy: temperature must be > 0");
  std::vector<double> p(static_cast<std::size_t>(V_));
  double mx = -INFINITY;
  for (int v = 0; v < V_; ++v) mx = std::max(mx, theta_[index(row, v)] / temperature);
  double z = 0.0;
  for (int v = 0; v < V_; ++v) {
    p[static_cast<std::size_t>(v)] = std::exp(theta_[index(row, v)] / temperature - mx);
    z += p[static_cast<std::size_t>(v)];
  }
  for (double& x : p) x /= z;
  return p;
}

int ToyPolicy::context(const Tokens& q, const Tokens& o, std::size_t t) const {
  const int c = t == 0 ? (q.empty() ? V_ : q.back()) : o[t - 1];
  if (c < 0 || c >= V_ + (t == 0 && q.empty() ? 1 : 0)) throw std::out_of_range("toy policy: token outside vocab");
  return c;
}

std::uint64_t ToyPolicy::fingerprint() const {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(V_) * 131 + static_cast<std::uint64_t>(eos_ + 1));
  for (double x : theta_) h = mix64(h ^ std::bit_cast<std::uint64_t>(x));
  return h;
}

namespace {

void check_token(const ToyPolicy& p, int tok) {
  if (tok < 0 || tok >= p.vocab()) throw std::out_of_range("toy policy: token " + std::to_string(tok) + " outside vocab");
}

void check_prompt(const ToyPolicy& p, const Tokens& q) {
  for (int t : q) check_token(p, t);
}

}  // namespace

double logprob(const ToyPolicy& p, const Tokens& q, const Tokens& o) {
  check_prompt(p, q);
  double s = 0.0;
  for (std::size_t t = 0; t < o.size(); ++t) {
    check_token(p, o[t]);
    const auto pr = p.probs(p.context(q, o, t));
    s += std::log(pr[static_cast<std::size_t>(o[t])]);
  }
  return s;
}

std::vector<double> grad_logprob(const ToyPolicy& p, const Tokens& q, const Tokens& o) {
  check_prompt(p, q);
  std::vector<double> g(p.num_params(), 0.0);
  for (std::size_t t = 0; t < o.size(); ++t) {
    check_token(p, o[t]);
    const int row = p.context(q, o, t);
    const auto pr = p.probs(row);
    for (int v = 0; v < p.vocab(); ++v) {
      g[p.index(row, v)] += (v == o[t] ? 1.0 : 0.0) - pr[static_cast<std::size_t>(v)];
    }
  }
  return g;
}

std::vector<Tokens> sample_group(const ToyPolicy& p, const Tokens& q, std::size_t N,
                                 double temperature, std::size_t max_len, std::uint64_t seed) {
  check_prompt(p, q);
  std::vector<Tokens> out;
  out.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    Rng rng(derive_seed(seed, i));
    Tokens o;
    while (o.size() < max_len) {
      const int row = p.context(q, o, o.size());
      int tok = 0;
      if (temperature == 0.0) {
        const auto pr = p.probs(row);
        for (int v = 1; v < p.vocab(); ++v) {
          if (pr[static_cast<std::size_t>(v)] > pr[static_cast<std::size_t>(tok)]) tok = v;
        }
      } else {
        const auto pr = p.probs(row, temperature);
        double u = rng.uniform01();
        tok = p.vocab() - 1;
        for (int v = 0; v < p.vocab(); ++v) {
          if (u < pr[static_cast<std::size_t>(v)]) {
            tok = v;
            break;
          }
          u -= pr[static_cast<std::size_t>(v)];
        }
      }
      o.push_back(tok);
      if (tok == p.eos()) break;
    }
    out.push_back(std::move(o));
  }
  return out;
}

double mean_nll(const ToyPolicy& p, const std::vector<std::pair<Tokens, Tokens>>& batch) {
  if (batch.empty()) throw std::invalid_argument("mean_nll: empty batch");
  double s = 0.0;
  for (const auto& [q, o] : batch) s -= logprob(p, q, o);
  return s / static_cast<double>(batch.size());
}

ToyPolicy sft_step(const ToyPolicy& p, const std::vector<std::pair<Tokens, Tokens>>& batch, double lr) {
  if (batch.empty()) throw std::invalid_argument("sft_step: empty batch");
  ToyPolicy out = p;
  const double w = lr / static_cast<double>(batch.size());
  for (const auto& [q, o] : batch) {
    const auto g = grad_logprob(p, q, o);
    for (std::size_t i = 0; i < g.size(); ++i) out.theta()[i] += w * g[i];
  }
  return out;
}

namespace {

template <class F>
void each_token(const ToyPolicy& p, const ToyPolicy& ref, const Tokens& q,
                const std::vector<Tokens>& outputs, F&& f) {
  if (p.vocab() != ref.vocab()) throw std::invalid_argument("kl: vocab mismatch");
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const Tokens& o = outputs[s];
    for (std::size_t t = 0; t < o.size(); ++t) {
      check_token(p, o[t]);
      const int row = p.context(q, o, t);
      f(s, row, o[t], p.probs(row), ref.probs(row));
    }
  }
}

}  // namespace

double kl_k3(const ToyPolicy& p, const ToyPolicy& ref, const Tokens& q, const std::vector<Tokens>& outputs) {
  double s = 0.0;
  std::size_t n = 0;
  each_token(p, ref, q, outputs, [&](std::size_t, int, int tok, const auto& pi, const auto& pr) {
    const double r = pr[static_cast<std::size_t>(tok)] / pi[static_cast<std::size_t>(tok)];
    s += r - std::log(r) - 1.0;
    ++n;
  });
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

double kl_exact(const ToyPolicy& p, const ToyPolicy& ref, const Tokens& q, const std::vector<Tokens>& outputs) {
  double s = 0.0;
  std::size_t n = 0;
  each_token(p, ref, q, outputs, [&](std::size_t, int, int, const auto& pi, const auto& pr) {
    for (std::size_t v = 0; v < pi.size(); ++v) {
      if (pi[v] > 0) s += pi[v] * std::log(pi[v] / pr[v]);
    }
    ++n;
  });
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

std::vector<double> grad_kl_k3(const ToyPolicy& p, const ToyPolicy& ref, const Tokens& q,
                               const std::vector<Tokens>& outputs) {
  std::vector<double> g(p.num_params(), 0.0);
  if (outputs.empty()) return g;
  const double w = 1.0 / static_cast<double>(outputs.size());
  each_token(p, ref, q, outputs, [&](std::size_t, int row, int tok, const auto& pi, const auto& pr) {
    const double c = w * (1.0 - pr[static_cast<std::size_t>(tok)] / pi[static_cast<std::size_t>(tok)]);
    for (int v = 0; v < p.vocab(); ++v) g[p.index(row, v)] -= c * pi[static_cast<std::size_t>(v)];
    g[p.index(row, tok)] += c;
  });
  return g;
}

std::vector<double> policy_gradient(const ToyPolicy& p, const RolloutGroup& g) {
  if (g.outputs.size() != g.advantages.size()) {
    throw std::invalid_argument("policy_gradient: outputs/advantages length mismatch");
  }
  std::vector<double> out(p.num_params(), 0.0);
  if (g.outputs.empty()) return out;
  const double w = 1.0 / static_cast<double>(g.outputs.size());
  for (std::size_t i = 0; i < g.outputs.size(); ++i) {
    if (g.advantages[i] == 0.0) continue;
    const auto gi = grad_logprob(p, g.prompt, g.outputs[i]);
    for (std::size_t k = 0; k < gi.size(); ++k) out[k] += w * g.advantages[i] * gi[k];
  }
  return out;
}

ToyPolicy grpo_step(const ToyPolicy& p, const RolloutGroup& g, const GrpoConfig& cfg, const ToyPolicy* ref) {
  validate(cfg);
  if (g.policy_fingerprint != p.fingerprint()) {
    throw std::logic_error("grpo_step: stale group for query '" + g.query_id +
                           "' (sampled from different parameters)");
  }
  if (cfg.beta > 0 && ref == nullptr) throw std::invalid_argument("grpo_step: beta > 0 needs a reference policy");
  ToyPolicy out = p;
  const auto pg = policy_gradient(p, g);
  for (std::size_t k = 0; k < pg.size(); ++k) out.theta()[k] += cfg.eta * pg[k];
  if (cfg.beta > 0) {
    const auto kl = grad_kl_k3(p, *ref, g.prompt, g.outputs);
    for (std::size_t k = 0; k < kl.size(); ++k) out.theta()[k] -= cfg.eta * cfg.beta * kl[k];
  }
  return out;
}

double policy_entropy(const ToyPolicy& p, const Tokens& q, const std::vector<Tokens>& outputs) {
  std::vector<std::vector<double>> dists;
  for (const Tokens& o : outputs) {
    for (std::size_t t = 0; t < o.size(); ++t) dists.push_back(p.probs(p.context(q, o, t)));
  }
  return entropy_metric(dists);
}

double policy_perplexity(const ToyPolicy& p, const std::vector<std::pair<Tokens, Tokens>>& data) {
  double lp = 0.0;
  std::size_t n = 0;
  for (const auto& [q, o] : data) {
    lp += logprob(p, q, o);
    n += o.size();
  }
  return perplexity_metric(lp, n);
}

void save_policy(const ToyPolicy& p, const std::string& path) {
  nlohmann::json h = {{"format", "bridge-toy-policy"}, {"version", 1},     {"V", p.vocab()},
                      {"context_order", 1},            {"eos", p.eos()},  {"lineage", p.lineage},
                      {"params", p.num_params()}};
  std::string out = h.dump() + "\n";
  for (double x : p.theta()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  atomic_write_file(path, out);
}

ToyPolicy load_policy(const std::string& path) {
  const std::string data = read_file(path);
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw std::runtime_error(path + ": missing policy header");
  const auto h = nlohmann::json::parse(data.substr(0, nl));
  if (h.value("format", "") != "bridge-toy-policy") throw std::runtime_error(path + ": not a toy policy file");
  ToyPolicy p(h.at("V").get<int>(), h.at("eos").get<int>());
  p.lineage = h.at("lineage").get<std::vector<std::uint64_t>>();
  if (data.size() - nl - 1 != 8 * p.num_params()) throw std::runtime_error(path + ": payload size mismatch");
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data() + nl + 1);
  for (std::size_t i = 0; i < p.num_params(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[8 * i + static_cast<std::size_t>(b)]) << (8 * b);
    p.theta()[i] = std::bit_cast<double>(bits);
  }
  return p;
}

// ---- micro tasks ----------------------------------------------------------

namespace {
constexpr std::string_view kSymbols = "0123456789+-*^=";
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  for (char c : text) {
    if (c == ' ') continue;
    const auto pos = kSymbols.find(c);
    if (pos == std::string_view::npos) throw std::invalid_argument(std::string("tokenize: no token for '") + c + "'");
    out.push_back(static_cast<int>(pos));
  }
  return out;
}

std::string detokenize(const Tokens& t) {
  std::string out;
  for (int x : t) {
    if (x == kToyEos) break;
    if (x < 0 || x >= static_cast<int>(kSymbols.size())) throw std::out_of_range("detokenize: bad token");
    out.push_back(kSymbols[static_cast<std::size_t>(x)]);
  }
  return out;
}

ToyTask toy_task_from(const Task& task) {
  const Dag& d = task.dag;
  auto val = [&](NodeId id) { return std::to_string(d.at(id).value); };
  auto join = [&](const std::vector<NodeId>& ids, std::string prefix) {
    for (std::size_t i = 0; i < ids.size(); ++i) prefix += (prefix.empty() ? "" : "+") + val(ids[i]);
    return prefix;
  };
  std::string prompt;
  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, expr::Const>) {
          prompt = std::to_string(e.k);
        } else if constexpr (std::is_same_v<E, expr::AddK>) {
          prompt = join(e.refs, std::to_string(e.k));
        } else if constexpr (std::is_same_v<E, expr::Sum> || std::is_same_v<E, expr::SumChildren>) {
          prompt = join(e.refs, "");
        } else if constexpr (std::is_same_v<E, expr::Diff>) {
          prompt = val(e.a) + "-" + val(e.b);
        } else if constexpr (std::is_same_v<E, expr::Scale>) {
          prompt = std::to_string(e.k) + "*" + val(e.ref);
        } else if constexpr (std::is_same_v<E, expr::Mul>) {
          prompt = val(e.a) + "*" + val(e.b);
        } else {
          prompt = val(e.ref) + "^2";
        }
      },
      d.at(d.target).expr);
  ToyTask t;
  t.task = task;
  t.prompt = tokenize(prompt);
  t.answer = tokenize(std::to_string(task.gold));
  t.answer.push_back(kToyEos);
  return t;
}

ToyTask make_toy_task(std::uint64_t seed) {
  PbConfig cfg;
  cfg.depth = 2;
  cfg.leaf_values = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  Task task = generate_pb(cfg, seed);
  task.id = "toy-" + std::to_string(seed);
  return toy_task_from(task);
}

std::string toy_output_text(const Tokens& output) {
  return "<think> </think>\n<answer> The final answer is \\boxed{" + detokenize(output) + "} </answer>";
}

double toy_reward(const ToyTask& t, const Tokens& output) {
  return outcome_reward(toy_output_text(output), t.task.gold, false);
}

RolloutGroup toy_rollout_group(const ToyPolicy& p, const ToyTask& t, std::size_t N, double temperature,
                               std::size_t max_len, std::uint64_t seed, const VariantSpec& v) {
  auto outputs = sample_group(p, t.prompt, N, temperature, max_len, seed);
  std::vector<double> rewards;
  for (const Tokens& o : outputs) rewards.push_back(toy_reward(t, o));
  RolloutGroup g = make_group(t.task.id, std::move(rewards), v, std::move(outputs));
  g.prompt = t.prompt;
  g.policy_fingerprint = p.fingerprint();
  return g;
}

TaylorResult taylor_influence_check(const ToyPolicy& p, const RolloutGroup& train,
                                    const std::vector<RolloutGroup>& targets, double eta) {
  const auto step = policy_gradient(p, train);
  std::vector<double> gJ(p.num_params(), 0.0);
  std::size_t count = 0;
  double j0 = 0.0;
  for (const auto& g : targets) {
    for (std::size_t i = 0; i < g.outputs.size(); ++i) {
      const auto gi = grad_logprob(p, g.prompt, g.outputs[i]);
      for (std::size_t k = 0; k < gi.size(); ++k) gJ[k] += g.advantages[i] * gi[k];
      j0 += g.advantages[i];
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("taylor_influence_check: empty target set");
  for (double& x : gJ) x /= static_cast<double>(count);
  j0 /= static_cast<double>(count);

  ToyPolicy moved = p;
  for (std::size_t k = 0; k < step.size(); ++k) moved.theta()[k] += eta * step[k];
  double j1 = 0.0;
  for (const auto& g : targets) {
    for (std::size_t i = 0; i < g.outputs.size(); ++i) {
      const double ratio = std::exp(logprob(moved, g.prompt, g.outputs[i]) - logprob(p, g.prompt, g.outputs[i]));
      j1 += g.advantages[i] * ratio;
    }
  }
  j1 /= static_cast<double>(count);
  return {eta * dot(gJ, step), j1 - j0};
}

}  // namespace bridge
