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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/grad.hpp"
#include "prism/partition.hpp"

namespace prism::evaluate {

struct EvalConfig {
  double alpha = 0.05;
  std::optional<int> k_override;
  int bootstrap_B = 10000;
  std::uint64_t seed = 0;
  bool inclusive_radius = true;
  unsigned threads = 1;
  // Test hook: every resample is the identity.
  bool identity_resample = false;

  void validate() const;
  /// k_override, or max(1, round-half-up(alpha * n)).
  int k_for(int n) const;
};

struct MetricReport {
  std::string style;
  std::string method;
  double fidelity = 0.0;  // bootstrap mean
  double diversity = 0.0;
  double fidelity_se = 0.0;  // standard error of the bootstrap mean
  double diversity_se = 0.0;
  double fidelity_sd = 0.0;  // spread of the bootstrap distribution
  double diversity_sd = 0.0;
  double fidelity_full = 0.0;  // on the full, unresampled sets
  double diversity_full = 0.0;
  int N = 0;
  int M = 0;
  int k = 0;
  int B = 0;

  nlohmann::json to_json() const;
};

/// Distance from each real sample to its k-th nearest other real sample.
std::vector<double> knn_radii(const Eigen::MatrixXd& d_real, int k);

/// Sum over (i, j) of [d_cross(i, j) <= radius_i]; d_cross is N x M.
std::int64_t fidelity_hits(const Eigen::MatrixXd& d_cross, std::span<const double> radii);
/// Number of real samples with at least one generated sample inside their radius.
std::int64_t diversity_hits(const Eigen::MatrixXd& d_cross, std::span<const double> radii);

double fidelity(const Eigen::MatrixXd& d_cross, std::span<const double> radii, int k);
double diversity(const Eigen::MatrixXd& d_cross, std::span<const double> radii);

/// Resamples real and generated sets with replacement B times, recomputing
/// radii per resample. Iteration b draws from substream (seed, b).
MetricReport bootstrap_metrics(const Eigen::MatrixXd& d_real, const Eigen::MatrixXd& d_cross, const EvalConfig& cfg);

using ScoreTable = std::map<std::string, std::map<std::string, double>>;  // method -> style -> score

/// Mean per-style rank of each method (1 = best, ties share the mean rank).
std::map<std::string, double> expected_rank(const ScoreTable& scores, bool higher_better);

std::string rank_csv(const std::map<std::string, double>& ranks);

struct Diagnostics {
  double mean_pairwise = 0.0;
  double best_silhouette = 0.0;
  int best_k = 0;

  nlohmann::json to_json() const;
};

/// Mean over unordered pairs of a distance matrix.
double mean_pairwise(const grad::DistanceMatrix& d);

/// Mean pairwise distance of `ids` and the best silhouette of k-medoids over
/// K = 2..min(k_max, n - 1).
Diagnostics input_diagnostics(const grad::DistanceMatrix& d, std::span<const std::string> ids, std::uint64_t seed,
                              int k_max = 5, const partition::KMedoidsOptions& opts = {});

struct CurationComparison {
  double curated_mean_pairwise = 0.0;  // averaged over the curated sets
  double random_mean_pairwise = 0.0;   // averaged over equal-size random sets
  double curated_silhouette = 0.0;     // best silhouette of the union of curated sets
  double random_silhouette = 0.0;      // same for a random set of the union's size
  nlohmann::json to_json() const;
};

/// Curated exemplar sets (one per cluster) against random draws of the same
/// sizes from all of `d`, without replacement.
CurationComparison compare_curation(const grad::DistanceMatrix& d,
                                    const std::vector<std::vector<std::string>>& curated_sets, std::uint64_t seed,
                                    int k_max = 5, const partition::KMedoidsOptions& opts = {});

}  // namespace prism::evaluate
