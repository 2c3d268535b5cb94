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

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "prism/error.hpp"
#include "prism/partition.hpp"
#include "support.hpp"

namespace prism::partition {
namespace {

using grad::DistanceMatrix;
using testing::euclidean_matrix;

DistanceMatrix line(const std::vector<double>& xs) {
  std::vector<std::vector<double>> pts;
  for (double x : xs) pts.push_back({x});
  return euclidean_matrix(pts);
}

// Best medoid pair by exhaustive search.
std::pair<std::size_t, std::size_t> brute_force_pair(const DistanceMatrix& d) {
  double best = INFINITY;
  std::pair<std::size_t, std::size_t> arg;
  for (std::size_t a = 0; a < d.size(); ++a) {
    for (std::size_t b = a + 1; b < d.size(); ++b) {
      double cost = 0;
      for (std::size_t o = 0; o < d.size(); ++o) cost += std::min(d.values(o, a), d.values(o, b));
      if (cost < best) {
        best = cost;
        arg = {a, b};
      }
    }
  }
  return arg;
}

std::vector<int> labels_of(const DistanceMatrix& d, const Partition& p) {
  std::vector<int> out;
  for (const auto& id : d.ids) out.push_back(p.assignments.at(id));
  return out;
}

TEST(KMedoids, SixPointLineMatchesBruteForce) {
  const DistanceMatrix d = line({0, 0.1, 0.2, 10, 10.1, 10.2});
  const auto [a, b] = brute_force_pair(d);
  const Partition p = k_medoids(d, 2, 1);
  EXPECT_EQ(p.medoids, (std::vector<std::string>{d.ids[a], d.ids[b]}));
  EXPECT_EQ(p.medoids, (std::vector<std::string>{d.ids[1], d.ids[4]}));
  EXPECT_EQ(p.cluster_sizes, (std::vector<int>{3, 3}));
}

TEST(KMedoids, RandomLinesMatchBruteForceCost) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> xs;
    for (int i = 0; i < 6; ++i) xs.push_back(rng.uniform() * 10);
    const DistanceMatrix d = line(xs);
    const auto [a, b] = brute_force_pair(d);
    double oracle = 0;
    for (std::size_t o = 0; o < 6; ++o) oracle += std::min(d.values(o, a), d.values(o, b));
    EXPECT_NEAR(k_medoids(d, 2, trial).cost, oracle, 1e-12);
  }
}

TEST(KMedoids, KBounds) {
  const DistanceMatrix d = line({0, 1, 2});
  EXPECT_THROW(k_medoids(d, 3, 0), Error);
  EXPECT_THROW(k_medoids(d, 1, 0), Error);
  try {
    k_medoids(d, 3, 0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::KOutOfRange);
  }
}

TEST(KMedoids, ZeroMatrixHasZeroCost) {
  DistanceMatrix d = line({0, 0, 0, 0, 0});
  const Partition p = k_medoids(d, 2, 0);
  EXPECT_EQ(p.cost, 0.0);
  EXPECT_EQ(p.cluster_sizes[0] + p.cluster_sizes[1], 5);
  for (int c = 0; c < 2; ++c) EXPECT_EQ(p.assignments.at(p.medoids[c]), c);
}

TEST(KMedoids, CostTraceIsMonotone) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({rng.uniform(), rng.uniform()});
    KMedoidsOptions opts;
    opts.restarts = 1;
    const Partition p = k_medoids(euclidean_matrix(pts), 4, trial, opts);
    for (std::size_t t = 1; t < p.cost_trace.size(); ++t) EXPECT_LE(p.cost_trace[t], p.cost_trace[t - 1]);
  }
}

TEST(KMedoids, InvariantToIdPermutation) {
  Rng rng(10);
  std::vector<std::vector<double>> pts;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 10; ++i) pts.push_back({c * 10 + rng.normal(), rng.normal()});
  }
  const DistanceMatrix d = euclidean_matrix(pts);
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<std::string> ids;
  for (std::size_t i : order) ids.push_back(d.ids[i]);
  const DistanceMatrix shuffled = d.restrict_to(ids);

  const Partition p = k_medoids(d, 3, 4);
  const Partition q = k_medoids(shuffled, 3, 4);
  std::vector<int> a, b;
  for (const auto& id : d.ids) {
    a.push_back(p.assignments.at(id));
    b.push_back(q.assignments.at(id));
  }
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, b), 1.0);
}

TEST(Silhouette, TightFarClusters) {
  const DistanceMatrix d = line({0, 0.1, 100, 100.1});
  const Partition p = k_medoids(d, 2, 0);
  EXPECT_GE(silhouette_score(d, p), 0.99);
}

TEST(Silhouette, SingletonsContributeZero) {
  const DistanceMatrix d = line({0, 5, 6});
  Partition p;
  p.k = 2;
  p.medoids = {d.ids[0], d.ids[1]};
  p.assignments = {{d.ids[0], 0}, {d.ids[1], 1}, {d.ids[2], 1}};
  p.cluster_sizes = {1, 2};
  // point 1: a = 1, b = 5; point 2: a = 1, b = 6
  EXPECT_NEAR(silhouette_score(d, p), (0.8 + 5.0 / 6.0) / 3.0, 1e-12);
}

TEST(Silhouette, CoincidentPointsScoreOne) {
  const DistanceMatrix d = line({0, 0, 50, 51});
  Partition p;
  p.k = 2;
  p.medoids = {d.ids[0], d.ids[2]};
  p.assignments = {{d.ids[0], 0}, {d.ids[1], 0}, {d.ids[2], 1}, {d.ids[3], 1}};
  p.cluster_sizes = {2, 2};
  const double s2 = (50.0 - 1.0) / 50.0;
  const double s3 = (51.0 - 1.0) / 51.0;
  EXPECT_NEAR(silhouette_score(d, p), (1.0 + 1.0 + s2 + s3) / 4.0, 1e-12);
}

TEST(Silhouette, RejectsInconsistentPartition) {
  const DistanceMatrix d = line({0, 1, 2});
  Partition p;
  p.k = 2;
  p.assignments = {{d.ids[0], 0}, {d.ids[1], 0}, {d.ids[2], 0}};
  EXPECT_THROW(silhouette_score(d, p), Error);
}

TEST(SelectPartition, FindsPlantedClusterCount) {
  Rng rng(12);
  for (int planted : {2, 3}) {
    std::vector<std::vector<double>> pts;
    std::vector<int> truth;
    for (int c = 0; c < planted; ++c) {
      for (int i = 0; i < 15; ++i) {
        pts.push_back({c * 20 + rng.normal(), rng.normal()});
        truth.push_back(c);
      }
    }
    const DistanceMatrix d = euclidean_matrix(pts);
    const Partition p = select_partition(d, 2, 5, 3);
    EXPECT_EQ(p.k, planted);
    EXPECT_DOUBLE_EQ(adjusted_rand_index(labels_of(d, p), truth), 1.0);
    if (planted == 2) {
      EXPECT_GT(p.silhouette, 0.8);
    }
  }
}

TEST(SelectPartition, SmallInputsLimitTheSweep) {
  const DistanceMatrix d = line({0, 1, 5});
  EXPECT_EQ(select_partition(d, 2, 5, 0).k, 2);
  EXPECT_THROW(select_partition(line({0, 1}), 2, 5, 0), Error);
}

TEST(Apportion, HandComputed) {
  EXPECT_EQ(apportion(10, std::vector<int>{60, 30, 10}), (std::vector<int>{6, 3, 1}));
  EXPECT_EQ(apportion(3, std::vector<int>{50, 50}), (std::vector<int>{2, 1}));
  EXPECT_EQ(apportion(10, std::vector<int>{60, 30}), (std::vector<int>{7, 3}));
  EXPECT_EQ(apportion(4, std::vector<int>{7}), (std::vector<int>{4}));
  // quotas 0.5, 1.5, 1.0: remainders tie between 0 and 1, larger size wins
  EXPECT_EQ(apportion(3, std::vector<int>{1, 3, 2}), (std::vector<int>{0, 2, 1}));
}

TEST(Apportion, SumsAndDeviationBound) {
  Rng rng(14);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> sizes(1 + rng.below(6));
    int n = 0;
    for (int& s : sizes) n += (s = static_cast<int>(1 + rng.below(80)));
    const int m = static_cast<int>(1 + rng.below(40));
    const auto out = apportion(m, sizes);
    EXPECT_EQ(std::accumulate(out.begin(), out.end(), 0), m);
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      EXPECT_LE(std::abs(static_cast<double>(out[c]) / m - static_cast<double>(sizes[c]) / n), 1.0 / m + 1e-12);
    }
  }
}

Partition planted_partition(DistanceMatrix& d, const std::vector<int>& sizes) {
  Rng rng(30);
  std::vector<std::vector<double>> pts;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    for (int i = 0; i < sizes[c]; ++i) pts.push_back({c * 100.0 + rng.uniform(), rng.uniform()});
  }
  d = euclidean_matrix(pts);
  return k_medoids(d, static_cast<int>(sizes.size()), 0);
}

TEST(Exemplars, PositivesSortedAndClamped) {
  DistanceMatrix d;
  const Partition p = planted_partition(d, {30, 10, 20});
  const ExemplarSet big = select_exemplars(d, p, 0, 25, 10);
  ASSERT_EQ(big.positives.size(), 25u);
  EXPECT_EQ(big.positives[0], p.medoids[0]);
  const auto m = *d.index_of(p.medoids[0]);
  for (std::size_t t = 1; t < big.positives.size(); ++t) {
    EXPECT_EQ(p.assignments.at(big.positives[t]), 0);
    EXPECT_LE(d.values(m, *d.index_of(big.positives[t - 1])), d.values(m, *d.index_of(big.positives[t])));
  }
  const ExemplarSet small = select_exemplars(d, p, 1, 25, 10);
  EXPECT_EQ(small.positives.size(), 10u);
}

TEST(Exemplars, NegativeQuotasFollowClusterSizes) {
  DistanceMatrix d;
  const Partition p = planted_partition(d, {60, 30, 20});
  const ExemplarSet e = select_exemplars(d, p, 2, 25, 10);
  ASSERT_EQ(e.negatives.size(), 10u);
  int from0 = 0;
  for (const auto& id : e.negatives) {
    EXPECT_NE(p.assignments.at(id), 2);
    from0 += p.assignments.at(id) == 0;
  }
  EXPECT_EQ(from0, 7);
  EXPECT_EQ(e.negatives[0], p.medoids[0]);
  EXPECT_EQ(e.negatives[7], p.medoids[1]);
}

TEST(Exemplars, NegativesLimitedByAvailability) {
  DistanceMatrix d;
  const Partition p = planted_partition(d, {20, 3});
  EXPECT_EQ(select_exemplars(d, p, 0, 25, 10).negatives.size(), 3u);
}

TEST(Exemplars, SingleClusterHasNoNegatives) {
  DistanceMatrix d = line({0, 1, 2});
  Partition p;
  p.k = 1;
  p.medoids = {d.ids[1]};
  p.cluster_sizes = {3};
  p.assignments = {{d.ids[0], 0}, {d.ids[1], 0}, {d.ids[2], 0}};
  try {
    select_exemplars(d, p, 0, 25, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoOtherCluster);
  }
  EXPECT_EQ(select_exemplars(d, p, 0, 25, 0).positives.size(), 3u);
}

TEST(PartitionJson, RoundTrip) {
  DistanceMatrix d;
  const Partition p = planted_partition(d, {5, 4});
  const nlohmann::json j = to_json(p, "abstract");
  EXPECT_EQ(j.at("style"), "abstract");
  const Partition back = partition_from_json(j);
  EXPECT_EQ(back.assignments, p.assignments);
  EXPECT_EQ(back.medoids, p.medoids);
  EXPECT_EQ(back.silhouette, p.silhouette);
}

TEST(AdjustedRand, KnownValues) {
  EXPECT_DOUBLE_EQ(adjusted_rand_index(std::vector<int>{0, 0, 1, 1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_LT(adjusted_rand_index(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}), 0.0);
}

}  // namespace
}  // namespace prism::partition
