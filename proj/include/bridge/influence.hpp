#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bridge/rl.hpp"

namespace bridge {

struct ProjectionSpec {
  std::uint64_t seed = 0;
  std::size_t in_dim = 0;
  std::size_t out_dim = 8192;
  bool operator==(const ProjectionSpec&) const = default;
};

// Throws std::invalid_argument unless 0 < out_dim < in_dim.
void validate(const ProjectionSpec& s);

struct GradVector {
  std::vector<double> values;
  std::optional<ProjectionSpec> spec;  // nullopt: raw gradient
  std::string sample_id;
  std::string query_id;
  double advantage = 0.0;
  bool correct = false;

  std::size_t dim() const { return values.size(); }
  GradView view() const { return values; }
  bool operator==(const GradVector&) const = default;
};

// R[r][c] = counter_normal(seed, r, c) / sqrt(out_dim). Rows are generated on
// the fly. Metadata is copied from the input.
GradVector project(const GradVector& g, const ProjectionSpec& spec);
// Each row of R is generated once and applied to every vector; output rows
// are split over `threads` workers with identical results for any count.
std::vector<GradVector> project_batch(const std::vector<GradVector>& gs, const ProjectionSpec& spec,
                                      unsigned threads = 1);

// Inner product; throws on dim or origin mismatch.
double coinfluence(const GradVector& a, const GradVector& b);

// Header line {dim, origin, spec?, sample_id, advantage, query_id, correct},
// then dim little-endian doubles.
void write_grad(const std::string& path, const GradVector& g);
GradVector read_grad(const std::string& path);
// All "*.grad" files of a directory, in file-name order.
std::vector<GradVector> read_grad_dir(const std::string& dir);

struct BucketRow {
  int n = 0;
  int N = 0;
  std::size_t count = 0;
  double mean_influence = 0.0;
  std::string label() const { return std::to_string(n) + "/" + std::to_string(N); }
};

// Groups gradients by query_id; every query must have the same N. Targets are
// all (query, output) pairs. One row per bucket 0/N..N/N; eta not applied.
std::vector<BucketRow> grouped_influence_report(const std::vector<GradVector>& grads,
                                                const VariantSpec& v = {});
// "bucket,count,mean_influence" with %.17g values.
std::string report_csv(const std::vector<BucketRow>& rows);

}  // namespace bridge
