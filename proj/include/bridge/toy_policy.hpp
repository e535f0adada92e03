#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bridge/rl.hpp"
#include "bridge/task.hpp"

namespace bridge {

using Tokens = std::vector<int>;

// Bigram softmax policy. Row r < V holds the logits after token r; row V is
// the start context, used when the prompt is empty. The first output token
// is conditioned on the last prompt token.
class ToyPolicy {
 public:
  ToyPolicy() = default;
  // All-zero logits (uniform). eos < 0 means no stop token.
  explicit ToyPolicy(int vocab, int eos = -1);
  // Logits i.i.d. N(0, scale^2).
  static ToyPolicy random(int vocab, double scale, std::uint64_t seed, int eos = -1);

  int vocab() const { return V_; }
  int eos() const { return eos_; }
  std::size_t num_params() const { return theta_.size(); }
  const std::vector<double>& theta() const { return theta_; }
  std::vector<double>& theta() { return theta_; }
  std::size_t index(int row, int token) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(V_) + static_cast<std::size_t>(token);
  }
  int start_row() const { return V_; }

  // Softmax of one row at the given temperature (> 0).
  std::vector<double> probs(int row, double temperature = 1.0) const;
  // Row that predicts o[t] after prompt q.
  int context(const Tokens& q, const Tokens& o, std::size_t t) const;

  // Hash of the parameter bits; changes whenever theta changes.
  std::uint64_t fingerprint() const;

  std::vector<std::uint64_t> lineage;  // seeds / steps that produced theta

  bool operator==(const ToyPolicy&) const = default;

 private:
  int V_ = 0;
  int eos_ = -1;
  std::vector<double> theta_;
};

// sum_t log pi(o_t | context). Throws std::out_of_range on unknown tokens.
double logprob(const ToyPolicy& p, const Tokens& q, const Tokens& o);
// d logprob / d theta: sum_t (e(o_t) - pi_t) on the row of each context.
std::vector<double> grad_logprob(const ToyPolicy& p, const Tokens& q, const Tokens& o);

// Ancestral sampling until eos or max_len tokens. temperature == 0 is greedy.
// Sample i draws from derive_seed(seed, i), so groups are order independent.
std::vector<Tokens> sample_group(const ToyPolicy& p, const Tokens& q, std::size_t N,
                                 double temperature, std::size_t max_len, std::uint64_t seed);

// One descent step on mean NLL over (prompt, output) pairs.
ToyPolicy sft_step(const ToyPolicy& p, const std::vector<std::pair<Tokens, Tokens>>& batch,
                   double lr);
double mean_nll(const ToyPolicy& p, const std::vector<std::pair<Tokens, Tokens>>& batch);

// Per-token k3 estimate r - log r - 1 with r = pi_ref / pi, averaged over tokens.
double kl_k3(const ToyPolicy& p, const ToyPolicy& ref, const Tokens& q,
             const std::vector<Tokens>& outputs);
// Exact per-token KL(pi || pi_ref) at the visited contexts, averaged over tokens.
double kl_exact(const ToyPolicy& p, const ToyPolicy& ref, const Tokens& q,
                const std::vector<Tokens>& outputs);
// Gradient of the per-sample summed k3 penalty, averaged over outputs.
std::vector<double> grad_kl_k3(const ToyPolicy& p, const ToyPolicy& ref, const Tokens& q,
                               const std::vector<Tokens>& outputs);

// (1/N) sum_i A_i grad logprob(o_i).
std::vector<double> policy_gradient(const ToyPolicy& p, const RolloutGroup& g);

// theta += eta * policy_gradient - eta * beta * grad_kl_k3. Throws
// std::logic_error when the group was sampled from other parameters.
ToyPolicy grpo_step(const ToyPolicy& p, const RolloutGroup& g, const GrpoConfig& cfg,
                    const ToyPolicy* ref = nullptr);

// Mean per-token entropy of the distributions that generated `outputs`.
double policy_entropy(const ToyPolicy& p, const Tokens& q, const std::vector<Tokens>& outputs);
double policy_perplexity(const ToyPolicy& p, const std::vector<std::pair<Tokens, Tokens>>& data);

// Header line (JSON) then V*(V+1) little-endian doubles.
void save_policy(const ToyPolicy& p, const std::string& path);
ToyPolicy load_policy(const std::string& path);

// ---- micro tasks ----------------------------------------------------------

// Digits 0-9, + - * ^ =, and the stop token.
inline constexpr int kToyVocab = 16;
inline constexpr int kToyEos = 15;
Tokens tokenize(std::string_view text);
std::string detokenize(const Tokens& t);

struct ToyTask {
  Task task;      // depth-2 PromptBench task
  Tokens prompt;  // e.g. "3*4"
  Tokens answer;  // gold digits then eos
};
ToyTask make_toy_task(std::uint64_t seed);
// Final computation of any task: the target's expression over its reference
// values, e.g. "13+5+6" -> "24".
ToyTask toy_task_from(const Task& task);
// Output tokens rendered inside the answer template, as scored by outcome_reward.
std::string toy_output_text(const Tokens& output);
double toy_reward(const ToyTask& t, const Tokens& output);

// Samples N outputs, scores them and builds the group (advantages per variant).
RolloutGroup toy_rollout_group(const ToyPolicy& p, const ToyTask& t, std::size_t N,
                               double temperature, std::size_t max_len, std::uint64_t seed,
                               const VariantSpec& v = {});

struct TaylorResult {
  double predicted = 0;
  double actual = 0;
};

// Frozen-sample check of the first-order influence of one GRPO step on
// `train` over the `targets` groups: J(Q; theta') = mean A' pi_theta'(o')/pi_theta(o').
TaylorResult taylor_influence_check(const ToyPolicy& p, const RolloutGroup& train,
                                    const std::vector<RolloutGroup>& targets, double eta);

}  // namespace bridge
