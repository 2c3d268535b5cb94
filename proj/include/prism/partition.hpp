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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "prism/grad.hpp"

namespace prism::partition {

struct Partition {
  int k = 0;
  std::map<std::string, int> assignments;
  std::vector<std::string> medoids;  // medoids[c] is the medoid of cluster c
  double silhouette = 0.0;
  std::vector<int> cluster_sizes;
  double cost = 0.0;                 // total distance of points to their medoid
  std::vector<double> cost_trace;    // after BUILD, then after each SWAP pass

  /// Members of cluster c in distance-matrix order.
  std::vector<std::string> members(const grad::DistanceMatrix& d, int c) const;
};

struct KMedoidsOptions {
  int restarts = 5;
  int max_swap_passes = 100;
};

/// PAM: greedy BUILD then steepest-descent SWAP. Restart 0 starts from BUILD,
/// later restarts from seeded random medoids; the lowest-cost run wins, ties
/// to the earliest restart. Points go to the nearest medoid, ties to the lower
/// cluster index. Clusters are numbered by medoid position in d.ids.
Partition k_medoids(const grad::DistanceMatrix& d, int k, std::uint64_t seed, const KMedoidsOptions& opts = {});

/// Mean silhouette. Singleton clusters contribute 0; a point with a = 0 and
/// b > 0 scores 1.
double silhouette_score(const grad::DistanceMatrix& d, const Partition& p);

/// Sweeps K over [k_min, min(k_max, N - 1)] and keeps the highest silhouette,
/// ties to the smaller K.
Partition select_partition(const grad::DistanceMatrix& d, int k_min, int k_max, std::uint64_t seed,
                           const KMedoidsOptions& opts = {});

struct ExemplarSet {
  std::string style;
  int cluster_index = 0;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  int i = 25;
  int j = 10;
};

/// Largest-remainder split of `total` proportional to `sizes`. Remainders
/// are ranked descending, ties to the larger size, then to the lower index.
std::vector<int> apportion(int total, std::span<const int> sizes);

/// Medoid followed by the nearest members of cluster c (ties by index).
std::vector<std::string> nearest_to_medoid(const grad::DistanceMatrix& d, const Partition& p, int c,
                                           std::size_t count);

ExemplarSet select_exemplars(const grad::DistanceMatrix& d, const Partition& p, int cluster_index, int i = 25,
                             int j = 10);

/// Adjusted Rand index between two labelings of the same points.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

nlohmann::json to_json(const Partition& p, const std::string& style);
Partition partition_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExemplarSet& e);
ExemplarSet exemplars_from_json(const nlohmann::json& j);

}  // namespace prism::partition
