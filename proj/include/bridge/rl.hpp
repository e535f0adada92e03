#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bridge {

enum class Variant { grpo, drgrpo, gpg, dapo };

struct VariantSpec {
  Variant variant = Variant::grpo;
  double C = 1.0;  // gpg only
  bool operator==(const VariantSpec&) const = default;
};

// "grpo", "drgrpo", "dapo", "gpg:C" (C > 0; bare "gpg" means C = 1).
VariantSpec parse_variant(std::string_view s);
std::string to_string(const VariantSpec& v);

struct GrpoConfig {
  int N = 32;
  double clip_eps = 0.2;  // kept for completeness; updates are on-policy
  double beta = 0.001;
  double gamma = 1.0;
  double eta = 1e-3;
  VariantSpec variant;
};

// Throws std::invalid_argument on N < 2, beta < 0, gamma != 1, eta < 0.
void validate(const GrpoConfig& c);

inline constexpr double kFormatBonus = 0.05;

// 1 if the boxed answer equals gold, plus kFormatBonus when requested and the
// output follows the template.
double outcome_reward(std::string_view model_output, std::int64_t gold, bool format_bonus);

// (r - mean) / population std; zeros when std == 0.
std::vector<double> group_advantages(const std::vector<double>& rewards);
// Dr.GRPO drops the std division.
std::vector<double> group_advantages(const std::vector<double>& rewards, const VariantSpec& v);

// (sqrt((N-n)/n), -sqrt(n/(N-n))). Throws std::domain_error unless 0 < n < N.
std::pair<double, double> closed_form_advantages(int n, int N);

double info_coefficient(double alpha, const VariantSpec& v);

struct RolloutGroup {
  std::string query_id;
  std::vector<int> prompt;           // toy policy context
  std::uint64_t policy_fingerprint = 0;  // parameters the outputs were sampled from
  std::vector<std::vector<int>> outputs;
  std::vector<double> rewards;  // correctness, in {0, 1}
  std::vector<double> format_bonus;
  int n = 0;
  int N = 0;
  double alpha = 0.0;
  std::vector<double> advantages;
};

// Fills n, N, alpha and advantages from binary correctness rewards.
RolloutGroup make_group(std::string query_id, std::vector<double> rewards,
                        const VariantSpec& v = {}, std::vector<std::vector<int>> outputs = {});

// Keeps groups with 0 < alpha < 1.
std::vector<RolloutGroup> dapo_query_filter(const std::vector<RolloutGroup>& groups);

using GradView = std::span<const double>;

// Sequential left-to-right sum.
double dot(GradView a, GradView b);

// mean over targets of A' g'.
std::vector<double> target_direction(const std::vector<GradView>& target_grads,
                                     const std::vector<double>& target_adv);

// Grouped form: eta * coef(alpha) * mean_T A' [mean_correct K - mean_incorrect K].
// Exactly 0 for n in {0, N}.
double per_step_influence(const std::vector<GradView>& train_grads,
                          const std::vector<bool>& train_correct,
                          const std::vector<GradView>& target_grads,
                          const std::vector<double>& target_adv, double eta = 1.0,
                          const VariantSpec& v = {});

// Same quantity against a precomputed target_direction.
double per_step_influence_dir(const std::vector<GradView>& train_grads,
                              const std::vector<bool>& train_correct, GradView direction,
                              double eta = 1.0, const VariantSpec& v = {});

// Raw form: eta * (1/N) sum_i A_i <g_i, mean_T A' g'>.
double per_step_influence_raw(const std::vector<GradView>& train_grads,
                              const std::vector<double>& train_adv,
                              const std::vector<GradView>& target_grads,
                              const std::vector<double>& target_adv, double eta = 1.0);

// Mean Shannon entropy (nats) of per-token distributions. Throws on empty input.
double entropy_metric(const std::vector<std::vector<double>>& distributions);
// exp(-sum logprob / tokens). Throws when tokens == 0.
double perplexity_metric(double total_logprob, std::size_t tokens);

}  // namespace bridge
