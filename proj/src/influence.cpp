#include "bridge/influence.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "bridge/io.hpp"
#include "bridge/rng.hpp"

namespace bridge {

void validate(const ProjectionSpec& s) {
  if (s.out_dim == 0 || s.out_dim >= s.in_dim) {
    throw std::invalid_argument("projection: need 0 < out_dim < in_dim (got " + std::to_string(s.out_dim) +
                                " and " + std::to_string(s.in_dim) + ")");
  }
}

std::vector<GradVector> project_batch(const std::vector<GradVector>& gs, const ProjectionSpec& spec,
                                      unsigned threads) {
  validate(spec);
  for (const auto& g : gs) {
    if (g.spec) throw std::invalid_argument("project: '" + g.sample_id + "' is already projected");
    if (g.dim() != spec.in_dim) {
      throw std::invalid_argument("project: '" + g.sample_id + "' has dim " + std::to_string(g.dim()) +
                                  ", spec expects " + std::to_string(spec.in_dim));
    }
  }
  std::vector<GradVector> out(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    out[i] = gs[i];
    out[i].values.assign(spec.out_dim, 0.0);
    out[i].spec = spec;
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.out_dim));
  auto work = [&](std::size_t r0, std::size_t r1) {
    std::vector<double> row(spec.in_dim);
    for (std::size_t r = r0; r < r1; ++r) {
      counter_normal_row(spec.seed, r, row.data(), row.size());
      for (std::size_t i = 0; i < gs.size(); ++i) {
        const double* g = gs[i].values.data();
        double s = 0.0;
        for (std::size_t c = 0; c < spec.in_dim; ++c) s += row[c] * g[c];
        out[i].values[r] = s * scale;
      }
    }
  };
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(spec.out_dim)));
  if (threads == 1) {
    work(0, spec.out_dim);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (spec.out_dim + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t r0 = t * chunk;
      const std::size_t r1 = std::min(spec.out_dim, r0 + chunk);
      if (r0 < r1) pool.emplace_back(work, r0, r1);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

GradVector project(const GradVector& g, const ProjectionSpec& spec) {
  return std::move(project_batch({g}, spec).front());
}

double coinfluence(const GradVector& a, const GradVector& b) {
  if (a.spec != b.spec) throw std::invalid_argument("coinfluence: origin mismatch");
  if (a.dim() != b.dim()) throw std::invalid_argument("coinfluence: dim mismatch");
  return dot(a.view(), b.view());
}

void write_grad(const std::string& path, const GradVector& g) {
  nlohmann::json h = {{"dim", g.dim()},           {"origin", g.spec ? "projected" : "raw"},
                      {"sample_id", g.sample_id}, {"advantage", g.advantage},
                      {"query_id", g.query_id},   {"correct", g.correct}};
  if (g.spec) h["spec"] = {{"seed", g.spec->seed}, {"in_dim", g.spec->in_dim}, {"out_dim", g.spec->out_dim}};
  std::string out = h.dump() + "\n";
  out.reserve(out.size() + 8 * g.dim());
  for (double x : g.values) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  atomic_write_file(path, out);
}

GradVector read_grad(const std::string& path) {
  const std::string data = read_file(path);
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw std::runtime_error(path + ": missing gradient header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(data.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad gradient header: " + e.what());
  }
  GradVector g;
  const auto dim = h.at("dim").get<std::size_t>();
  const auto origin = h.at("origin").get<std::string>();
  if (origin == "projected") {
    const auto& s = h.at("spec");
    g.spec = ProjectionSpec{s.at("seed").get<std::uint64_t>(), s.at("in_dim").get<std::size_t>(),
                            s.at("out_dim").get<std::size_t>()};
    if (g.spec->out_dim != dim) throw std::runtime_error(path + ": dim differs from spec out_dim");
  } else if (origin != "raw") {
    throw std::runtime_error(path + ": unknown origin '" + origin + "'");
  }
  g.sample_id = h.value("sample_id", "");
  g.query_id = h.at("query_id").get<std::string>();
  g.advantage = h.at("advantage").get<double>();
  g.correct = h.at("correct").get<bool>();
  if (data.size() - nl - 1 != 8 * dim) throw std::runtime_error(path + ": payload does not match dim");
  g.values.resize(dim);
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data() + nl + 1);
  for (std::size_t i = 0; i < dim; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[8 * i + static_cast<std::size_t>(b)]) << (8 * b);
    g.values[i] = std::bit_cast<double>(bits);
  }
  return g;
}

std::vector<GradVector> read_grad_dir(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".grad") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  std::vector<GradVector> out;
  for (const auto& f : files) out.push_back(read_grad(f));
  return out;
}

std::vector<BucketRow> grouped_influence_report(const std::vector<GradVector>& grads, const VariantSpec& v) {
  if (grads.empty()) throw std::invalid_argument("influence report: no gradients");
  std::map<std::string, std::vector<const GradVector*>> by_query;
  std::vector<GradView> target_grads;
  std::vector<double> target_adv;
  for (const auto& g : grads) {
    if (g.spec != grads.front().spec || g.dim() != grads.front().dim()) {
      throw std::invalid_argument("influence report: mixed gradient origins or dims");
    }
    by_query[g.query_id].push_back(&g);
    target_grads.push_back(g.view());
    target_adv.push_back(g.advantage);
  }
  const int N = static_cast<int>(by_query.begin()->second.size());
  for (const auto& [q, members] : by_query) {
    if (static_cast<int>(members.size()) != N) {
      throw std::invalid_argument("influence report: ragged groups (query '" + q + "' has " +
                                  std::to_string(members.size()) + " outputs, expected " + std::to_string(N) + ")");
    }
  }
  const auto direction = target_direction(target_grads, target_adv);

  std::vector<BucketRow> rows(static_cast<std::size_t>(N) + 1);
  std::vector<double> sums(rows.size(), 0.0);
  for (int n = 0; n <= N; ++n) {
    rows[static_cast<std::size_t>(n)].n = n;
    rows[static_cast<std::size_t>(n)].N = N;
  }
  for (const auto& [q, members] : by_query) {
    std::vector<GradView> gs;
    std::vector<bool> correct;
    int n = 0;
    for (const auto* g : members) {
      gs.push_back(g->view());
      correct.push_back(g->correct);
      n += g->correct ? 1 : 0;
    }
    const double infl = per_step_influence_dir(gs, correct, direction, 1.0, v);
    rows[static_cast<std::size_t>(n)].count += 1;
    sums[static_cast<std::size_t>(n)] += infl;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].count > 0) rows[i].mean_influence = sums[i] / static_cast<double>(rows[i].count);
  }
  return rows;
}

std::string report_csv(const std::vector<BucketRow>& rows) {
  std::string out = "bucket,count,mean_influence\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.mean_influence);
    out += r.label() + "," + std::to_string(r.count) + "," + buf + "\n";
  }
  return out;
}

}  // namespace bridge
