#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "bridge/behavior.hpp"
#include "bridge/dataset.hpp"
#include "bridge/errors.hpp"
#include "bridge/igsm.hpp"
#include "bridge/io.hpp"
#include "bridge/worked_examples.hpp"
#include "bridge/promptbench.hpp"
#include "bridge/rl.hpp"

using namespace bridge;

namespace {

std::vector<Task> mixed_tasks(std::size_t n) {
  std::vector<Task> out;
  const IgsmWorld w = default_igsm_world();
  PbConfig pc;
  pc.depth = 5;
  pc.redundancy_range = {0, 8};
  for (std::size_t i = 0; i < n; ++i) {
    Task t = i % 2 ? generate_pb(pc, i) : generate_igsm(IgsmConfig{}, w, i);
    if (i % 3 == 0) t = bridge_augment(t, {0.3, true, {}, i});
    out.push_back(std::move(t));
  }
  return out;
}

std::string tmp(const std::string& name) { return ::testing::TempDir() + name; }

}  // namespace

TEST(Json, ExprRoundTrip) {
  using namespace expr;
  for (const Expr& e : std::vector<Expr>{Const{-3}, AddK{4, {1, 2}}, Sum{{0}}, Diff{1, 2}, Scale{5, 3}, Mul{0, 1},
                                         Square{2}, SumChildren{{3, 4, 5}}}) {
    EXPECT_EQ(expr_from_json(to_json(e)), e);
  }
  EXPECT_ANY_THROW(expr_from_json(nlohmann::json{{"tag", "mod"}}));
}

TEST(Json, WorkedExampleTasksRoundTrip) {
  for (const Task& t : {igsm_worked_task(), igsm_worked_bridge_task(), pb_worked_task()}) {
    EXPECT_EQ(task_from_json(to_json(t)), t);
  }
}

TEST(Dataset, WriteReadThousand) {
  const auto tasks = mixed_tasks(1000);
  const std::string path = tmp("thousand.jsonl");
  write_dataset(tasks, path, {{"note", "test"}});
  const Dataset ds = read_dataset(path, true);
  EXPECT_EQ(ds.tasks, tasks);
  EXPECT_EQ(ds.header["schema"], "bridge-dataset");
  EXPECT_EQ(ds.header["version"], kDatasetVersion);
  EXPECT_EQ(ds.header["count"], 1000);
  EXPECT_EQ(ds.header["config"]["note"], "test");
  EXPECT_EQ(read_file(path), dataset_text(tasks, {{"note", "test"}}));
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp." + std::to_string(::getpid())));
}

TEST(Dataset, CorruptLineNamed) {
  const auto tasks = mixed_tasks(5);
  std::string text = dataset_text(tasks);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  lines[3] = lines[3].substr(0, lines[3].size() / 2);
  std::ofstream out(tmp("corrupt.jsonl"));
  for (const auto& l : lines) out << l << "\n";
  out.close();
  try {
    read_dataset(tmp("corrupt.jsonl"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(Dataset, StrictReadFlagsBadCot) {
  Task t = pb_worked_task();
  t.cot[2].equation_chain.back() = "13";
  write_dataset({igsm_worked_task(), t}, tmp("badcot.jsonl"));
  try {
    read_dataset(tmp("badcot.jsonl"), true);
    FAIL() << "expected VerificationError";
  } catch (const VerificationError& e) {
    EXPECT_EQ(e.task_id(), t.id);
  }
  EXPECT_EQ(read_dataset(tmp("badcot.jsonl"), false).tasks.size(), 2u);
}

TEST(Dataset, HeaderRequired) {
  std::ofstream(tmp("noheader.jsonl")) << to_json(pb_worked_task()).dump() << "\n";
  EXPECT_THROW(read_dataset(tmp("noheader.jsonl")), ParseError);
  std::ofstream(tmp("empty.jsonl")).close();
  EXPECT_THROW(read_dataset(tmp("empty.jsonl")), ParseError);
}

TEST(Rollouts, RoundTrip) {
  RolloutRecord r;
  r.query_id = "igsm-3";
  r.n = 2;
  r.N = 4;
  r.rewards = {1, 1, 0, 0};
  r.format_bonus = {0.05, 0.05, 0.05, 0};
  r.advantages = group_advantages(r.rewards);
  r.grad_refs = {"a.grad", "b.grad", "c.grad", "d.grad"};
  r.variant = "grpo";
  r.info_coefficient = 0.5;
  write_rollouts({r, r}, tmp("r.jsonl"));
  const auto back = read_rollouts(tmp("r.jsonl"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].query_id, r.query_id);
  EXPECT_EQ(back[0].advantages, r.advantages);
  EXPECT_EQ(back[0].grad_refs, r.grad_refs);
  EXPECT_EQ(back[1].info_coefficient, 0.5);
  const auto j = to_json(r);
  EXPECT_TRUE(j.contains("advantage"));
  EXPECT_TRUE(j.contains("grad_ref"));
}

TEST(Jsonl, ParseErrorLine) {
  std::ofstream(tmp("x.jsonl")) << "{\"a\": 1}\n\n{oops\n";
  try {
    read_jsonl(tmp("x.jsonl"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}
