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

#include "prism/transport.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "prism/error.hpp"

namespace prism::grad {

Eigen::MatrixXd exact_uniform_transport(const Eigen::MatrixXd& cost) {
  const Eigen::Index rows = cost.rows();
  const Eigen::Index cols = cost.cols();
  if (rows == 0 || cols == 0) fail(Errc::InvalidArgument, "transport cost matrix is empty");
  if (!cost.allFinite()) fail(Errc::SolverDiverged, "transport cost matrix has non-finite entries");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto n_rows = static_cast<std::size_t>(rows);
  const auto n_cols = static_cast<std::size_t>(cols);

  std::vector<std::int64_t> supply(n_rows, cols);
  std::vector<std::int64_t> demand(n_cols, rows);
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> flow =
      Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(rows, cols);

  // Node potentials; reduced cost of row i -> col j is cost(i,j) + pot_row[i] - pot_col[j].
  std::vector<double> pot_row(n_rows, 0.0);
  std::vector<double> pot_col(n_cols);
  for (Eigen::Index j = 0; j < cols; ++j) pot_col[j] = cost.col(j).minCoeff();

  std::int64_t remaining = static_cast<std::int64_t>(rows) * cols;
  std::vector<double> dist_row(n_rows), dist_col(n_cols);
  std::vector<char> done_row(n_rows), done_col(n_cols);
  std::vector<Eigen::Index> pred_col(n_cols);  // row that reached this column
  std::vector<Eigen::Index> pred_row(n_rows);  // column that reached this row, -1 for a source

  while (remaining > 0) {
    std::fill(done_row.begin(), done_row.end(), 0);
    std::fill(done_col.begin(), done_col.end(), 0);
    std::fill(dist_col.begin(), dist_col.end(), kInf);
    for (std::size_t i = 0; i < n_rows; ++i) {
      dist_row[i] = supply[i] > 0 ? 0.0 : kInf;
      pred_row[i] = -1;
    }

    Eigen::Index target = -1;
    double target_dist = kInf;
    for (;;) {
      // Dense Dijkstra: pick the closest unfinished node.
      double best = kInf;
      Eigen::Index best_node = -1;
      bool best_is_row = false;
      for (std::size_t i = 0; i < n_rows; ++i) {
        if (!done_row[i] && dist_row[i] < best) {
          best = dist_row[i];
          best_node = static_cast<Eigen::Index>(i);
          best_is_row = true;
        }
      }
      for (std::size_t j = 0; j < n_cols; ++j) {
        if (!done_col[j] && dist_col[j] < best) {
          best = dist_col[j];
          best_node = static_cast<Eigen::Index>(j);
          best_is_row = false;
        }
      }
      if (best_node < 0) break;
      if (best_is_row) {
        const Eigen::Index i = best_node;
        done_row[i] = 1;
        for (Eigen::Index j = 0; j < cols; ++j) {
          if (done_col[j]) continue;
          const double rc = std::max(0.0, cost(i, j) + pot_row[i] - pot_col[j]);
          if (best + rc < dist_col[j]) {
            dist_col[j] = best + rc;
            pred_col[j] = i;
          }
        }
      } else {
        const Eigen::Index j = best_node;
        done_col[j] = 1;
        if (demand[j] > 0) {
          target = j;
          target_dist = best;
          break;
        }
        for (Eigen::Index i = 0; i < rows; ++i) {
          if (done_row[i] || flow(i, j) == 0) continue;
          const double rc = std::max(0.0, -(cost(i, j) + pot_row[i] - pot_col[j]));
          if (best + rc < dist_row[i]) {
            dist_row[i] = best + rc;
            pred_row[i] = j;
          }
        }
      }
    }
    if (target < 0) fail(Errc::SolverDiverged, "transport solver found no augmenting path");

    for (std::size_t i = 0; i < n_rows; ++i) pot_row[i] += std::min(dist_row[i], target_dist);
    for (std::size_t j = 0; j < n_cols; ++j) pot_col[j] += std::min(dist_col[j], target_dist);

    // Walk back to the source row to find the bottleneck.
    std::int64_t amount = demand[target];
    Eigen::Index j = target;
    Eigen::Index i = pred_col[j];
    while (pred_row[i] >= 0) {
      const Eigen::Index prev_col = pred_row[i];
      amount = std::min(amount, flow(i, prev_col));
      j = prev_col;
      i = pred_col[j];
    }
    amount = std::min(amount, supply[i]);

    supply[i] -= amount;
    demand[target] -= amount;
    remaining -= amount;
    j = target;
    i = pred_col[j];
    for (;;) {
      flow(i, j) += amount;
      if (pred_row[i] < 0) break;
      const Eigen::Index prev_col = pred_row[i];
      flow(i, prev_col) -= amount;
      j = prev_col;
      i = pred_col[j];
    }
  }

  const double scale = 1.0 / (static_cast<double>(rows) * static_cast<double>(cols));
  return flow.cast<double>() * scale;
}

}  // namespace prism::grad
