#include "bridge/rl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bridge/cot.hpp"

namespace bridge {

VariantSpec parse_variant(std::string_view s) {
  if (s == "grpo") return {Variant::grpo, 1.0};
  if (s == "drgrpo") return {Variant::drgrpo, 1.0};
  if (s == "dapo") return {Variant::dapo, 1.0};
  if (s == "gpg") return {Variant::gpg, 1.0};
  if (s.substr(0, 4) == "gpg:") {
    const std::string c(s.substr(4));
    std::size_t used = 0;
    double C = 0;
    try {
      C = std::stod(c, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != c.size() || !(C > 0) || !std::isfinite(C)) {
      throw std::invalid_argument("gpg needs a positive constant, got '" + c + "'");
    }
    return {Variant::gpg, C};
  }
  throw std::invalid_argument("unknown variant: " + std::string(s));
}

std::string to_string(const VariantSpec& v) {
  switch (v.variant) {
    case Variant::grpo: return "grpo";
    case Variant::drgrpo: return "drgrpo";
    case Variant::dapo: return "dapo";
    case Variant::gpg: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "gpg:%.17g", v.C);
      return buf;
    }
  }
  return "grpo";
}

void validate(const GrpoConfig& c) {
  if (c.N < 2) throw std::invalid_argument("grpo config: N must be >= 2");
  if (c.beta < 0) throw std::invalid_argument("grpo config: beta must be >= 0");
  if (c.gamma != 1.0) throw std::invalid_argument("grpo config: gamma is fixed to 1");
  if (c.eta < 0) throw std::invalid_argument("grpo config: eta must be >= 0");
  if (c.variant.variant == Variant::gpg && !(c.variant.C > 0)) {
    throw std::invalid_argument("grpo config: gpg C must be positive");
  }
}

double outcome_reward(std::string_view model_output, std::int64_t gold, bool format_bonus) {
  const ModelOutput m = parse_model_output(model_output);
  double r = (m.final_answer && *m.final_answer == gold) ? 1.0 : 0.0;
  if (format_bonus && m.format_ok) r += kFormatBonus;
  return r;
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
  return group_advantages(rewards, {});
}

std::vector<double> group_advantages(const std::vector<double>& rewards, const VariantSpec& v) {
  if (rewards.size() < 2) throw std::invalid_argument("group_advantages: need N >= 2");
  const double N = static_cast<double>(rewards.size());
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= N;
  double var = 0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= N;
  std::vector<double> out(rewards.size(), 0.0);
  // Equal rewards give an inexact mean (e.g. eight 0.05s), so test equality directly.
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) return out;
  const double scale = v.variant == Variant::drgrpo ? 1.0 : 1.0 / std::sqrt(var);
  const double c = v.variant == Variant::gpg ? v.C : 1.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = v.variant == Variant::gpg ? c * (rewards[i] - mean) : (rewards[i] - mean) * scale;
  }
  return out;
}

std::pair<double, double> closed_form_advantages(int n, int N) {
  if (n <= 0 || n >= N) {
    throw std::domain_error("closed_form_advantages: degenerate group n=" + std::to_string(n) +
                            " N=" + std::to_string(N));
  }
  const double dn = n, dN = N;
  return {std::sqrt((dN - dn) / dn), -std::sqrt(dn / (dN - dn))};
}

double info_coefficient(double alpha, const VariantSpec& v) {
  if (alpha < 0 || alpha > 1) throw std::domain_error("info_coefficient: alpha outside [0, 1]");
  const double x = alpha * (1.0 - alpha);
  switch (v.variant) {
    case Variant::grpo:
    case Variant::dapo: return std::sqrt(x);
    case Variant::drgrpo: return x;
    case Variant::gpg: return v.C * x;
  }
  return 0.0;
}

RolloutGroup make_group(std::string query_id, std::vector<double> rewards, const VariantSpec& v,
                        std::vector<std::vector<int>> outputs) {
  RolloutGroup g;
  g.query_id = std::move(query_id);
  g.N = static_cast<int>(rewards.size());
  for (double r : rewards) {
    if (r != 0.0 && r != 1.0) throw std::invalid_argument("make_group: rewards must be 0 or 1");
    g.n += r == 1.0 ? 1 : 0;
  }
  g.alpha = g.N > 0 ? static_cast<double>(g.n) / g.N : 0.0;
  g.advantages = group_advantages(rewards, v);
  g.rewards = std::move(rewards);
  g.format_bonus.assign(g.rewards.size(), 0.0);
  g.outputs = std::move(outputs);
  return g;
}

std::vector<RolloutGroup> dapo_query_filter(const std::vector<RolloutGroup>& groups) {
  std::vector<RolloutGroup> out;
  for (const auto& g : groups) {
    if (g.n > 0 && g.n < g.N) out.push_back(g);
  }
  return out;
}

double dot(GradView a, GradView b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: dimension mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> target_direction(const std::vector<GradView>& target_grads,
                                     const std::vector<double>& target_adv) {
  if (target_grads.empty()) throw std::invalid_argument("target_direction: no targets");
  if (target_grads.size() != target_adv.size()) {
    throw std::invalid_argument("target_direction: grads/advantages length mismatch");
  }
  std::vector<double> d(target_grads.front().size(), 0.0);
  for (std::size_t t = 0; t < target_grads.size(); ++t) {
    if (target_grads[t].size() != d.size()) throw std::invalid_argument("target_direction: ragged dims");
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += target_adv[t] * target_grads[t][i];
  }
  const double inv = 1.0 / static_cast<double>(target_grads.size());
  for (double& x : d) x *= inv;
  return d;
}

double per_step_influence_dir(const std::vector<GradView>& train_grads,
                              const std::vector<bool>& train_correct, GradView direction,
                              double eta, const VariantSpec& v) {
  if (train_grads.size() != train_correct.size()) {
    throw std::invalid_argument("per_step_influence: grads/correct length mismatch");
  }
  std::size_t n = 0;
  for (bool c : train_correct) n += c ? 1 : 0;
  const std::size_t N = train_correct.size();
  if (n == 0 || n == N) return 0.0;
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double k = dot(train_grads[i], direction);
    (train_correct[i] ? pos : neg) += k;
  }
  pos /= static_cast<double>(n);
  neg /= static_cast<double>(N - n);
  const double alpha = static_cast<double>(n) / static_cast<double>(N);
  return eta * info_coefficient(alpha, v) * (pos - neg);
}

double per_step_influence(const std::vector<GradView>& train_grads,
                          const std::vector<bool>& train_correct,
                          const std::vector<GradView>& target_grads,
                          const std::vector<double>& target_adv, double eta, const VariantSpec& v) {
  std::size_t n = 0;
  for (bool c : train_correct) n += c ? 1 : 0;
  if (n == 0 || n == train_correct.size()) return 0.0;
  const auto d = target_direction(target_grads, target_adv);
  return per_step_influence_dir(train_grads, train_correct, d, eta, v);
}

double per_step_influence_raw(const std::vector<GradView>& train_grads,
                              const std::vector<double>& train_adv,
                              const std::vector<GradView>& target_grads,
                              const std::vector<double>& target_adv, double eta) {
  if (train_grads.size() != train_adv.size()) {
    throw std::invalid_argument("per_step_influence_raw: grads/advantages length mismatch");
  }
  const auto d = target_direction(target_grads, target_adv);
  double s = 0.0;
  for (std::size_t i = 0; i < train_grads.size(); ++i) s += train_adv[i] * dot(train_grads[i], d);
  return eta * s / static_cast<double>(train_grads.size());
}

double entropy_metric(const std::vector<std::vector<double>>& distributions) {
  if (distributions.empty()) throw std::invalid_argument("entropy_metric: empty input");
  double total = 0.0;
  for (const auto& p : distributions) {
    for (double x : p) {
      if (x > 0) total -= x * std::log(x);
    }
  }
  return total / static_cast<double>(distributions.size());
}

double perplexity_metric(double total_logprob, std::size_t tokens) {
  if (tokens == 0) throw std::invalid_argument("perplexity_metric: no tokens");
  return std::exp(-total_logprob / static_cast<double>(tokens));
}

}  // namespace bridge
