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

#include "prism/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "prism/error.hpp"
#include "prism/random.hpp"

namespace prism::partition {
namespace {

using grad::DistanceMatrix;

struct Run {
  std::vector<std::size_t> medoids;
  double cost = 0.0;
  std::vector<double> trace;
};

double total_cost(const Eigen::MatrixXd& d, const std::vector<std::size_t>& medoids) {
  double total = 0.0;
  for (Eigen::Index o = 0; o < d.rows(); ++o) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m : medoids) best = std::min(best, d(o, static_cast<Eigen::Index>(m)));
    total += best;
  }
  return total;
}

std::vector<std::size_t> build(const Eigen::MatrixXd& d, int k) {
  const auto n = static_cast<std::size_t>(d.rows());
  std::vector<std::size_t> medoids;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  for (int step = 0; step < k; ++step) {
    std::size_t best = n;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < n; ++h) {
      if (chosen[h]) continue;
      double cost = 0.0;
      for (std::size_t o = 0; o < n; ++o) cost += std::min(nearest[o], d(o, h));
      if (cost < best_cost) {
        best_cost = cost;
        best = h;
      }
    }
    chosen[best] = 1;
    medoids.push_back(best);
    for (std::size_t o = 0; o < n; ++o) nearest[o] = std::min(nearest[o], d(o, best));
  }
  return medoids;
}

// Steepest-descent SWAP: applies the single best improving (medoid, point)
// exchange per pass.
Run swap_phase(const Eigen::MatrixXd& d, std::vector<std::size_t> medoids, int max_passes) {
  const auto n = static_cast<std::size_t>(d.rows());
  Run run;
  run.cost = total_cost(d, medoids);
  run.trace.push_back(run.cost);
  std::vector<double> first(n), second(n);
  std::vector<std::size_t> owner(n);
  for (int pass = 0; pass < max_passes; ++pass) {
    for (std::size_t o = 0; o < n; ++o) {
      first[o] = second[o] = std::numeric_limits<double>::infinity();
      for (std::size_t slot = 0; slot < medoids.size(); ++slot) {
        const double v = d(o, medoids[slot]);
        if (v < first[o]) {
          second[o] = first[o];
          first[o] = v;
          owner[o] = slot;
        } else if (v < second[o]) {
          second[o] = v;
        }
      }
    }
    std::vector<char> is_medoid(n, 0);
    for (std::size_t m : medoids) is_medoid[m] = 1;

    double best_cost = run.cost;
    std::size_t best_slot = 0, best_h = n;
    for (std::size_t slot = 0; slot < medoids.size(); ++slot) {
      for (std::size_t h = 0; h < n; ++h) {
        if (is_medoid[h]) continue;
        double cost = 0.0;
        for (std::size_t o = 0; o < n; ++o) {
          const double keep = owner[o] == slot ? second[o] : first[o];
          cost += std::min(keep, d(o, h));
        }
        if (cost < best_cost - 1e-12 * std::max(1.0, run.cost)) {
          best_cost = cost;
          best_slot = slot;
          best_h = h;
        }
      }
    }
    if (best_h == n) break;
    medoids[best_slot] = best_h;
    run.cost = total_cost(d, medoids);
    run.trace.push_back(run.cost);
  }
  run.medoids = std::move(medoids);
  return run;
}

void check_square(const DistanceMatrix& d) {
  if (d.values.rows() != static_cast<Eigen::Index>(d.size()) || d.values.cols() != d.values.rows()) {
    fail(Errc::ShapeMismatch, "distance matrix shape does not match its ids");
  }
}

}  // namespace

std::vector<std::string> Partition::members(const grad::DistanceMatrix& d, int c) const {
  std::vector<std::string> out;
  for (const auto& id : d.ids) {
    const auto it = assignments.find(id);
    if (it != assignments.end() && it->second == c) out.push_back(id);
  }
  return out;
}

Partition k_medoids(const DistanceMatrix& d, int k, std::uint64_t seed, const KMedoidsOptions& opts) {
  check_square(d);
  const auto n = static_cast<int>(d.size());
  if (k < 2 || k > n - 1) {
    fail(Errc::KOutOfRange, "K=" + std::to_string(k) + " outside [2, " + std::to_string(n - 1) + "]");
  }
  if (opts.restarts < 1 || opts.max_swap_passes < 0) fail(Errc::InvalidArgument, "invalid k-medoids options");

  Run best;
  for (int r = 0; r < opts.restarts; ++r) {
    std::vector<std::size_t> init;
    if (r == 0) {
      init = build(d.values, k);
    } else {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)}));
      std::vector<std::size_t> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      for (int s = 0; s < k; ++s) {
        const auto pick = s + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n - s)));
        std::swap(order[s], order[pick]);
      }
      init.assign(order.begin(), order.begin() + k);
    }
    Run run = swap_phase(d.values, std::move(init), opts.max_swap_passes);
    if (r == 0 || run.cost < best.cost) best = std::move(run);
  }

  std::sort(best.medoids.begin(), best.medoids.end());
  Partition p;
  p.k = k;
  p.cost = best.cost;
  p.cost_trace = best.trace;
  p.cluster_sizes.assign(static_cast<std::size_t>(k), 0);
  for (std::size_t m : best.medoids) p.medoids.push_back(d.ids[m]);
  for (int o = 0; o < n; ++o) {
    int label = 0;
    const auto self = std::find(best.medoids.begin(), best.medoids.end(), static_cast<std::size_t>(o));
    if (self != best.medoids.end()) {
      label = static_cast<int>(self - best.medoids.begin());
    } else {
      for (int c = 1; c < k; ++c) {
        if (d.values(o, static_cast<Eigen::Index>(best.medoids[c])) <
            d.values(o, static_cast<Eigen::Index>(best.medoids[label]))) {
          label = c;
        }
      }
    }
    p.assignments[d.ids[o]] = label;
    ++p.cluster_sizes[label];
  }
  p.silhouette = silhouette_score(d, p);
  return p;
}

double silhouette_score(const DistanceMatrix& d, const Partition& p) {
  check_square(d);
  const auto n = d.size();
  if (p.k < 1 || p.assignments.size() != n) fail(Errc::InconsistentPartition, "partition does not cover the matrix");
  std::vector<int> labels(n);
  std::vector<int> sizes(static_cast<std::size_t>(p.k), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = p.assignments.find(d.ids[i]);
    if (it == p.assignments.end() || it->second < 0 || it->second >= p.k) {
      fail(Errc::InconsistentPartition, "design \"" + d.ids[i] + "\" has no valid cluster");
    }
    labels[i] = it->second;
    ++sizes[it->second];
  }
  for (int s : sizes) {
    if (s == 0) fail(Errc::InconsistentPartition, "partition has an empty cluster");
  }

  double total = 0.0;
  std::vector<double> sums(static_cast<std::size_t>(p.k));
  for (std::size_t i = 0; i < n; ++i) {
    const int own = labels[i];
    if (sizes[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[labels[j]] += d.values(i, j);
    }
    const double a = sums[own] / (sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < p.k; ++c) {
      if (c != own) b = std::min(b, sums[c] / sizes[c]);
    }
    if (!std::isfinite(b)) continue;
    const double scale = std::max(a, b);
    if (scale > 0.0) total += (b - a) / scale;
  }
  return total / static_cast<double>(n);
}

Partition select_partition(const DistanceMatrix& d, int k_min, int k_max, std::uint64_t seed,
                           const KMedoidsOptions& opts) {
  const auto n = static_cast<int>(d.size());
  if (k_min < 2 || k_max < k_min) fail(Errc::KOutOfRange, "K sweep bounds must satisfy 2 <= k_min <= k_max");
  if (n < k_min + 1) {
    fail(Errc::TooFewDesigns,
        std::to_string(n) + " designs cannot be split into " + std::to_string(k_min) + " clusters");
  }
  Partition best;
  for (int k = k_min; k <= std::min(k_max, n - 1); ++k) {
    Partition p = k_medoids(d, k, seed, opts);
    if (k == k_min || p.silhouette > best.silhouette) best = std::move(p);
  }
  return best;
}

std::vector<int> apportion(int total, std::span<const int> sizes) {
  if (total < 0) fail(Errc::InvalidArgument, "cannot apportion a negative total");
  std::int64_t n = 0;
  for (int s : sizes) {
    if (s < 0) fail(Errc::InvalidArgument, "apportionment sizes must be >= 0");
    n += s;
  }
  std::vector<int> out(sizes.size(), 0);
  if (total == 0) return out;
  if (n == 0) fail(Errc::InvalidArgument, "cannot apportion over zero total size");
  std::int64_t assigned = 0;
  std::vector<std::int64_t> remainder(sizes.size());
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const std::int64_t scaled = static_cast<std::int64_t>(total) * sizes[c];
    out[c] = static_cast<int>(scaled / n);
    remainder[c] = scaled % n;
    assigned += out[c];
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    if (sizes[a] != sizes[b]) return sizes[a] > sizes[b];
    return a < b;
  });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++out[order[r]];
  return out;
}

std::vector<std::string> nearest_to_medoid(const DistanceMatrix& d, const Partition& p, int c, std::size_t count) {
  if (c < 0 || c >= p.k) fail(Errc::InconsistentPartition, "cluster index " + std::to_string(c) + " out of range");
  const auto medoid = d.index_of(p.medoids[c]);
  if (!medoid) fail(Errc::InconsistentPartition, "medoid \"" + p.medoids[c] + "\" not in distance matrix");
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto it = p.assignments.find(d.ids[i]);
    if (i != *medoid && it != p.assignments.end() && it->second == c) others.push_back(i);
  }
  std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
    return d.values(*medoid, a) < d.values(*medoid, b);
  });
  std::vector<std::string> out;
  if (count == 0) return out;
  out.push_back(p.medoids[c]);
  for (std::size_t i = 0; i < others.size() && out.size() < count; ++i) out.push_back(d.ids[others[i]]);
  return out;
}

ExemplarSet select_exemplars(const DistanceMatrix& d, const Partition& p, int cluster_index, int i, int j) {
  if (i < 1 || j < 0) fail(Errc::InvalidArgument, "exemplar counts must satisfy i >= 1, j >= 0");
  if (cluster_index < 0 || cluster_index >= p.k) {
    fail(Errc::InconsistentPartition, "cluster index " + std::to_string(cluster_index) + " out of range");
  }
  if (j > 0 && p.k < 2) fail(Errc::NoOtherCluster, "negatives need at least two clusters");
  ExemplarSet e;
  e.cluster_index = cluster_index;
  e.i = i;
  e.j = j;
  e.positives = nearest_to_medoid(d, p, cluster_index, static_cast<std::size_t>(i));

  std::vector<int> other_clusters, other_sizes;
  int available = 0;
  for (int c = 0; c < p.k; ++c) {
    if (c == cluster_index) continue;
    other_clusters.push_back(c);
    other_sizes.push_back(p.cluster_sizes[c]);
    available += p.cluster_sizes[c];
  }
  const std::vector<int> quotas = apportion(std::min(j, available), other_sizes);
  for (std::size_t o = 0; o < other_clusters.size(); ++o) {
    const auto picks = nearest_to_medoid(d, p, other_clusters[o], static_cast<std::size_t>(quotas[o]));
    e.negatives.insert(e.negatives.end(), picks.begin(), picks.end());
  }
  return e;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) fail(Errc::ShapeMismatch, "labelings differ in length");
  const int ka = a.empty() ? 0 : *std::max_element(a.begin(), a.end()) + 1;
  const int kb = b.empty() ? 0 : *std::max_element(b.begin(), b.end()) + 1;
  std::vector<std::vector<double>> table(static_cast<std::size_t>(ka),
                                         std::vector<double>(static_cast<std::size_t>(kb)));
  std::vector<double> row(static_cast<std::size_t>(ka)), col(static_cast<std::size_t>(kb));
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[a[i]][b[i]] += 1;
    row[a[i]] += 1;
    col[b[i]] += 1;
  }
  auto pairs = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& r : table) {
    for (double v : r) index += pairs(v);
  }
  for (double v : row) sum_rows += pairs(v);
  for (double v : col) sum_cols += pairs(v);
  const double expected = sum_rows * sum_cols / pairs(static_cast<double>(a.size()));
  const double maximum = (sum_rows + sum_cols) / 2;
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

nlohmann::json to_json(const Partition& p, const std::string& style) {
  nlohmann::json assignments = nlohmann::json::object();
  for (const auto& [id, c] : p.assignments) assignments[id] = c;
  return {{"style", style},       {"K", p.k},
          {"silhouette", p.silhouette}, {"medoids", p.medoids},
          {"assignments", assignments}, {"cluster_sizes", p.cluster_sizes}};
}

Partition partition_from_json(const nlohmann::json& j) {
  Partition p;
  p.k = j.at("K").get<int>();
  p.silhouette = j.at("silhouette").get<double>();
  p.medoids = j.at("medoids").get<std::vector<std::string>>();
  p.cluster_sizes = j.at("cluster_sizes").get<std::vector<int>>();
  for (const auto& [id, c] : j.at("assignments").items()) p.assignments[id] = c.get<int>();
  if (static_cast<int>(p.medoids.size()) != p.k || static_cast<int>(p.cluster_sizes.size()) != p.k) {
    fail(Errc::InconsistentPartition, "partition JSON lists do not match K");
  }
  return p;
}

nlohmann::json to_json(const ExemplarSet& e) {
  return {{"style", e.style}, {"cluster_index", e.cluster_index}, {"i", e.i},
          {"j", e.j}, {"positives", e.positives}, {"negatives", e.negatives}};
}

ExemplarSet exemplars_from_json(const nlohmann::json& j) {
  ExemplarSet e;
  e.style = j.at("style").get<std::string>();
  e.cluster_index = j.at("cluster_index").get<int>();
  e.i = j.at("i").get<int>();
  e.j = j.at("j").get<int>();
  e.positives = j.at("positives").get<std::vector<std::string>>();
  e.negatives = j.at("negatives").get<std::vector<std::string>>();
  return e;
}

}  // namespace prism::partition
