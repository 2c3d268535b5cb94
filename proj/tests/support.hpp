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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "prism/grad.hpp"
#include "prism/random.hpp"

namespace prism::testing {

inline Eigen::MatrixXd random_unit_rows(Rng& rng, Eigen::Index rows, Eigen::Index dim) {
  Eigen::MatrixXd m(rows, dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = rng.normal();
    m.row(r).normalize();
  }
  return m;
}

inline grad::PatchGraph graph_from(const std::string& id, const Eigen::MatrixXd& rows) {
  ingest::PatchEmbeddings emb;
  emb.design_id = id;
  emb.matrix = rows;
  return grad::build_patch_graph(emb);
}

inline grad::PatchGraph random_graph(Rng& rng, const std::string& id, Eigen::Index patches, Eigen::Index dim) {
  return graph_from(id, random_unit_rows(rng, patches, dim));
}

// Minimum over all permutations of the mean assignment cost.
inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) total += cost(static_cast<Eigen::Index>(i), perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(cost.rows());
}

// Distance matrix of points under the Euclidean metric.
inline grad::DistanceMatrix euclidean_matrix(const std::vector<std::vector<double>>& points) {
  grad::DistanceMatrix m;
  const auto n = static_cast<Eigen::Index>(points.size());
  m.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.ids.push_back("d" + std::to_string(1000 + i));
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < points[i].size(); ++c)
          s += (points[i][c] - points[j][c]) * (points[i][c] - points[j][c]);
      m.values(i, j) = std::sqrt(s);
    }
  }
  return m;
}

}  // namespace prism::testing
