// Copyright 2026 The PRISM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prism/ingest.hpp"

namespace prism::grad {

/// A design as a complete graph over its image patches.
struct PatchGraph {
  std::string design_id;
  Eigen::MatrixXd features;    // P x D, unit rows
  Eigen::MatrixXd intra_cost;  // P x P cosine distances
  Eigen::VectorXd weights;     // uniform 1/P

  Eigen::Index size() const { return features.rows(); }
};

struct GradParams {
  double lambda = 0.5;  // weight of the feature term; 1 - lambda weighs structure
  double epsilon = 0.01;
  int max_outer_iters = 200;
  int max_sinkhorn_iters = 500;
  double tol = 1e-7;
  std::uint64_t seed = 0;
  // Exact conditional-gradient steps run after the entropic phase.
  int polish_iters = 50;

  void validate() const;
  /// Hex digest over every field; keys distance caches.
  std::string hash() const;
};

struct GradResult {
  double value = 0.0;        // clamped at 0
  double raw_value = 0.0;    // objective before clamping
  Eigen::MatrixXd coupling;  // P x Q
  int outer_iterations = 0;
  int polish_iterations = 0;
  bool iteration_limit = false;  // entropic phase stopped at max_outer_iters
};

PatchGraph build_patch_graph(const ingest::PatchEmbeddings& emb);

/// Fused Gromov-Wasserstein objective at the coupling T:
///   lambda * <T, C_cross> + (1 - lambda) * sum |Ca[p][p'] - Cb[q][q']|^2 T[p][q] T[p'][q']
double fused_gw_objective(const PatchGraph& a, const PatchGraph& b, const Eigen::MatrixXd& coupling,
                          double lambda);

/// Cross-graph feature cost 1 - <a_p, b_q>.
Eigen::MatrixXd cross_cost(const PatchGraph& a, const PatchGraph& b);

/// Entropic mirror descent from the independent coupling, followed by exact
/// Frank-Wolfe polishing. Throws SolverDiverged on non-finite intermediates.
GradResult grad_solve(const PatchGraph& a, const PatchGraph& b, const GradParams& params);

double grad_distance(const PatchGraph& a, const PatchGraph& b, const GradParams& params);

struct DistanceMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;

  std::size_t size() const { return ids.size(); }
  std::optional<std::size_t> index_of(const std::string& id) const;
  /// Principal submatrix over `subset`, in that order.
  DistanceMatrix restrict_to(std::span<const std::string> subset) const;
};

/// Rectangular real-to-generated distances.
struct CrossMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  Eigen::MatrixXd values;
};

// GDM1: "GDM1", u32 N, N NUL-terminated ids, N*N f32 row-major.
std::string encode_gdm1(const DistanceMatrix& m);
DistanceMatrix decode_gdm1(std::string_view bytes, const std::string& source);
void write_gdm1(const std::filesystem::path& path, const DistanceMatrix& m);
DistanceMatrix read_gdm1(const std::filesystem::path& path);

// GDC1: "GDC1", u32 N, u32 M, N ids, M ids, N*M f32 row-major.
std::string encode_gdc1(const CrossMatrix& m);
CrossMatrix decode_gdc1(std::string_view bytes, const std::string& source);

/// Persistent store of pair distances for one parameter setting. A square
/// cache is backed by a GDM1 file and keyed by unordered id pair; a cross
/// cache is backed by GDC1 and keyed by (row id, column id).
class DistanceCache {
 public:
  enum class Kind { Square, Cross };

  DistanceCache(std::filesystem::path path, Kind kind);

  const std::filesystem::path& path() const { return path_; }
  std::optional<double> lookup(const std::string& a, const std::string& b) const;
  void store(const std::string& a, const std::string& b, double value);
  std::size_t size() const { return pairs_.size(); }

  void save(const DistanceMatrix& m) const;
  void save(const CrossMatrix& m) const;

 private:
  std::pair<std::string, std::string> key(const std::string& a, const std::string& b) const;

  std::filesystem::path path_;
  Kind kind_;
  std::map<std::pair<std::string, std::string>, double> pairs_;
};

struct PairwiseStats {
  std::size_t solver_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t iteration_limit_pairs = 0;
};

struct PairwiseOptions {
  DistanceCache* cache = nullptr;
  unsigned threads = 1;
};

/// Symmetric N x N GRAD matrix. Only the upper triangle is solved; values
/// are stored at float32 precision so cold and cached runs agree exactly.
DistanceMatrix pairwise_distances(std::span<const PatchGraph> graphs, const GradParams& params,
                                  const PairwiseOptions& options = {}, PairwiseStats* stats = nullptr);

CrossMatrix cross_distances(std::span<const PatchGraph> rows, std::span<const PatchGraph> cols,
                            const GradParams& params, const PairwiseOptions& options = {},
                            PairwiseStats* stats = nullptr);

}  // namespace prism::grad
