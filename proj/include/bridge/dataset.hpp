#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "bridge/task.hpp"

namespace bridge {

inline constexpr int kDatasetVersion = 1;

nlohmann::json to_json(const Expr& e);
Expr expr_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Dag& dag);
Dag dag_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CotStep& s);
CotStep cot_step_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Task& t);
Task task_from_json(const nlohmann::json& j);

// First line: {"schema": "bridge-dataset", "version": 1, "count": K, "config": ...}
// then one task per line.
std::string dataset_text(const std::vector<Task>& tasks, const nlohmann::json& config = nullptr);
void write_dataset(const std::vector<Task>& tasks, const std::string& path,
                   const nlohmann::json& config = nullptr);

struct Dataset {
  nlohmann::json header;
  std::vector<Task> tasks;
};

// Throws ParseError (1-based line) on malformed lines; with `strict`, also
// VerificationError for the first task whose CoT fails verify_cot.
Dataset read_dataset(const std::string& path, bool strict = true);

// One rollout group per line.
struct RolloutRecord {
  std::string query_id;
  int n = 0;
  int N = 0;
  std::vector<double> rewards;       // correctness in {0, 1}
  std::vector<double> format_bonus;  // 0 or kFormatBonus
  std::vector<double> advantages;
  std::vector<std::string> grad_refs;
  std::string variant;  // how advantages were computed
  double info_coefficient = 0.0;
};

nlohmann::json to_json(const RolloutRecord& r);
RolloutRecord rollout_from_json(const nlohmann::json& j);
std::string rollouts_text(const std::vector<RolloutRecord>& rs);
void write_rollouts(const std::vector<RolloutRecord>& rs, const std::string& path);
std::vector<RolloutRecord> read_rollouts(const std::string& path);

// Generic JSONL reader: one object per non-empty line, ParseError on failure.
std::vector<nlohmann::json> read_jsonl(const std::string& path);

}  // namespace bridge
