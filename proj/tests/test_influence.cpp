#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bridge/influence.hpp"
#include "bridge/rng.hpp"

using namespace bridge;

namespace {

GradVector random_grad(std::size_t dim, Rng& rng) {
  GradVector g;
  g.values.resize(dim);
  for (double& x : g.values) x = rng.normal();
  return g;
}

// g and h share a common direction, cosine about 0.8.
std::pair<GradVector, GradVector> correlated_pair(std::size_t dim, Rng& rng) {
  GradVector base = random_grad(dim, rng);
  GradVector g = random_grad(dim, rng), h = random_grad(dim, rng);
  for (std::size_t i = 0; i < dim; ++i) {
    g.values[i] = 2 * base.values[i] + g.values[i];
    h.values[i] = 2 * base.values[i] + h.values[i];
  }
  return {g, h};
}

double raw_dot(const GradVector& a, const GradVector& b) { return dot(a.view(), b.view()); }

// Synthetic corpus: `queries` groups of N grads with n_q correct.
std::vector<GradVector> corpus(std::size_t queries, int N, std::size_t dim, Rng& rng) {
  std::vector<GradVector> out;
  for (std::size_t q = 0; q < queries; ++q) {
    const int n = static_cast<int>(q % static_cast<std::size_t>(N + 1));
    std::vector<double> rewards(N, 0.0);
    for (int i = 0; i < n; ++i) rewards[i] = 1.0;
    const auto adv = group_advantages(rewards);
    for (int i = 0; i < N; ++i) {
      GradVector g = random_grad(dim, rng);
      g.query_id = "q" + std::to_string(q);
      g.sample_id = g.query_id + "-" + std::to_string(i);
      g.correct = i < n;
      g.advantage = adv[i];
      out.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace

TEST(Projection, SpecValidation) {
  EXPECT_THROW(validate(ProjectionSpec{1, 10, 10}), std::invalid_argument);
  EXPECT_THROW(validate(ProjectionSpec{1, 10, 0}), std::invalid_argument);
  EXPECT_NO_THROW(validate(ProjectionSpec{1, 10, 4}));
}

TEST(Projection, ZeroAndDeterminism) {
  GradVector z;
  z.values.assign(100, 0.0);
  const ProjectionSpec s{3, 100, 16};
  for (double x : project(z, s).values) EXPECT_EQ(x, 0.0);
  Rng rng(1);
  const GradVector g = random_grad(100, rng);
  EXPECT_EQ(project(g, s), project(g, s));
  EXPECT_EQ(project(g, s).spec, s);
  EXPECT_THROW(project(g, ProjectionSpec{3, 99, 16}), std::invalid_argument);
}

TEST(Projection, MatrixEntries) {
  GradVector e;
  e.values.assign(50, 0.0);
  e.values[7] = 1.0;
  const ProjectionSpec s{9, 50, 8};
  const GradVector p = project(e, s);
  for (std::size_t r = 0; r < 8; ++r) EXPECT_DOUBLE_EQ(p.values[r], counter_normal(9, r, 7) / std::sqrt(8.0));
}

TEST(Projection, Linearity) {
  Rng rng(2);
  const GradVector g = random_grad(500, rng), h = random_grad(500, rng);
  const double a = -1.75;
  GradVector mix = g;
  for (std::size_t i = 0; i < 500; ++i) mix.values[i] = a * g.values[i] + h.values[i];
  const ProjectionSpec s{4, 500, 32};
  const auto pm = project(mix, s), pg = project(g, s), ph = project(h, s);
  for (std::size_t r = 0; r < 32; ++r) {
    EXPECT_NEAR(pm.values[r], a * pg.values[r] + ph.values[r], 1e-12 * (1 + std::abs(pm.values[r])));
  }
}

TEST(Projection, BatchMatchesSingleForAnyThreadCount) {
  Rng rng(3);
  std::vector<GradVector> gs;
  for (int i = 0; i < 5; ++i) gs.push_back(random_grad(300, rng));
  const ProjectionSpec s{5, 300, 40};
  const auto one = project_batch(gs, s, 1);
  for (unsigned t : {2u, 3u, 8u}) EXPECT_EQ(project_batch(gs, s, t), one);
  for (std::size_t i = 0; i < gs.size(); ++i) EXPECT_EQ(one[i], project(gs[i], s));
}

TEST(Projection, InnerProductPreservedInExpectation) {
  Rng rng(4);
  const std::size_t dim = 2000;
  const auto [g, h] = correlated_pair(dim, rng);
  const double truth = raw_dot(g, h);
  double mean = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto p = project_batch({g, h}, ProjectionSpec{seed, dim, 256});
    mean += coinfluence(p[0], p[1]);
  }
  mean /= 200;
  EXPECT_NEAR(mean, truth, 0.02 * std::abs(truth));
}

TEST(Coinfluence, Basics) {
  Rng rng(5);
  const GradVector g = random_grad(64, rng);
  double n2 = 0;
  for (double x : g.values) n2 += x * x;
  EXPECT_DOUBLE_EQ(coinfluence(g, g), n2);
  GradVector e1, e2;
  e1.values = {1, 0, 0};
  e2.values = {0, 1, 0};
  EXPECT_EQ(coinfluence(e1, e2), 0.0);
  EXPECT_THROW(coinfluence(g, e1), std::invalid_argument);
  const GradVector pg = project(g, ProjectionSpec{1, 64, 8});
  const GradVector ph = project(g, ProjectionSpec{2, 64, 8});
  EXPECT_THROW(coinfluence(pg, ph), std::invalid_argument);
  EXPECT_THROW(coinfluence(pg, g), std::invalid_argument);
}

TEST(GradFile, RoundTrip) {
  Rng rng(6);
  GradVector g = random_grad(33, rng);
  g.sample_id = "q1-3";
  g.query_id = "q1";
  g.advantage = -0.5773502691896258;
  g.correct = false;
  const std::string dir = ::testing::TempDir() + "grads_rt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_grad(dir + "/b.grad", g);
  const GradVector p = project(g, ProjectionSpec{7, 33, 5});
  write_grad(dir + "/a.grad", p);
  EXPECT_EQ(read_grad(dir + "/b.grad"), g);
  EXPECT_EQ(read_grad(dir + "/a.grad"), p);
  std::ofstream(dir + "/ignored.txt") << "x";
  const auto all = read_grad_dir(dir);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0], p);
  std::ofstream(dir + "/bad.grad") << "{\"dim\": 3}\nshort";
  EXPECT_ANY_THROW(read_grad(dir + "/bad.grad"));
}

TEST(Report, DegenerateBucketsAreZero) {
  Rng rng(7);
  const auto grads = corpus(18, 8, 20, rng);
  const auto rows = grouped_influence_report(grads);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0].label(), "0/8");
  EXPECT_EQ(rows[0].mean_influence, 0.0);
  EXPECT_EQ(rows[8].mean_influence, 0.0);
  EXPECT_EQ(rows[0].count, 2u);
  for (int n = 1; n < 8; ++n) EXPECT_NE(rows[n].mean_influence, 0.0);
}

TEST(Report, AllCorrectCorpus) {
  Rng rng(8);
  std::vector<GradVector> grads;
  for (int q = 0; q < 3; ++q) {
    for (int i = 0; i < 4; ++i) {
      GradVector g = random_grad(6, rng);
      g.query_id = "q" + std::to_string(q);
      g.correct = true;
      grads.push_back(g);
    }
  }
  const auto rows = grouped_influence_report(grads);
  for (const auto& r : rows) {
    EXPECT_EQ(r.mean_influence, 0.0);
    EXPECT_EQ(r.count, r.n == 4 ? 3u : 0u);
  }
}

TEST(Report, MatchesBruteForce) {
  Rng rng(9);
  const auto grads = corpus(9, 4, 12, rng);
  std::vector<GradView> tg;
  std::vector<double> ta;
  for (const auto& g : grads) {
    tg.push_back(g.view());
    ta.push_back(g.advantage);
  }
  std::vector<double> sum(5, 0.0);
  std::vector<int> count(5, 0);
  for (std::size_t q = 0; q < 9; ++q) {
    std::vector<GradView> train;
    std::vector<double> adv;
    int n = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      train.push_back(grads[q * 4 + i].view());
      adv.push_back(grads[q * 4 + i].advantage);
      n += grads[q * 4 + i].correct;
    }
    sum[n] += per_step_influence_raw(train, adv, tg, ta, 1.0);
    ++count[n];
  }
  const auto rows = grouped_influence_report(grads);
  for (int n = 0; n <= 4; ++n) {
    EXPECT_EQ(rows[n].count, static_cast<std::size_t>(count[n]));
    EXPECT_NEAR(rows[n].mean_influence, count[n] ? sum[n] / count[n] : 0.0, 1e-10);
  }
}

TEST(Report, RelabelSymmetryAndStability) {
  Rng rng(10);
  auto grads = corpus(10, 4, 8, rng);
  const std::string a = report_csv(grouped_influence_report(grads));
  EXPECT_EQ(a, report_csv(grouped_influence_report(grads)));
  for (auto& g : grads) g.query_id = "renamed-" + g.query_id;
  const auto b = grouped_influence_report(grads);
  Rng again(10);
  const auto ra = grouped_influence_report(corpus(10, 4, 8, again));
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(b[i].count, ra[i].count);
    EXPECT_NEAR(b[i].mean_influence, ra[i].mean_influence, 1e-12 * (1 + std::abs(ra[i].mean_influence)));
  }
  EXPECT_EQ(a.substr(0, a.find('\n')), "bucket,count,mean_influence");
}

TEST(Report, RaggedGroupsThrow) {
  Rng rng(11);
  auto grads = corpus(3, 4, 5, rng);
  grads.pop_back();
  EXPECT_THROW(grouped_influence_report(grads), std::invalid_argument);
}

TEST(Projection, PairFidelityAtModerateScale) {
  Rng rng(12);
  const std::size_t dim = 20000, pool = 24;
  std::vector<GradVector> gs;
  GradVector base = random_grad(dim, rng);
  for (std::size_t i = 0; i < pool; ++i) {
    GradVector g = random_grad(dim, rng);
    for (std::size_t k = 0; k < dim; ++k) g.values[k] += 2 * base.values[k];
    gs.push_back(std::move(g));
  }
  const auto ps = project_batch(gs, ProjectionSpec{77, dim, 1024});
  int ok = 0, total = 0;
  for (std::size_t i = 0; i < pool; ++i) {
    for (std::size_t j = i + 1; j < pool; ++j) {
      const double t = raw_dot(gs[i], gs[j]);
      ok += std::abs(coinfluence(ps[i], ps[j]) - t) <= 0.1 * std::abs(t);
      ++total;
    }
  }
  EXPECT_GE(ok, 0.9 * total);
}
