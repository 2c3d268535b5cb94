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

#include <algorithm>
#include <cmath>

#include "prism/error.hpp"
#include "prism/evaluate.hpp"
#include "prism/random.hpp"
#include "support.hpp"

namespace prism::evaluate {
namespace {

using Points = std::vector<double>;

Eigen::MatrixXd abs_diff(const Points& rows, const Points& cols) {
  Eigen::MatrixXd d(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) d(i, j) = std::abs(rows[i] - cols[j]);
  }
  return d;
}

TEST(Radii, HandEnumerated) {
  const Points x{0, 1, 3};
  EXPECT_EQ(knn_radii(abs_diff(x, x), 1), (std::vector<double>{1, 1, 2}));
  EXPECT_EQ(knn_radii(abs_diff(x, x), 2), (std::vector<double>{3, 2, 3}));
  EXPECT_EQ(knn_radii(abs_diff({5, 5, 9}, {5, 5, 9}), 1), (std::vector<double>{0, 0, 4}));
  try {
    knn_radii(abs_diff(x, x), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::KTooLarge);
  }
}

TEST(Metrics, HandEnumerated) {
  const Points x{0, 1, 2};
  const auto radii = knn_radii(abs_diff(x, x), 1);
  const Eigen::MatrixXd cross = abs_diff(x, {0.5});
  EXPECT_DOUBLE_EQ(fidelity(cross, radii, 1), 2.0);
  EXPECT_DOUBLE_EQ(diversity(cross, radii), 2.0 / 3.0);
  const Eigen::MatrixXd far = abs_diff(x, {100});
  EXPECT_EQ(fidelity(far, radii, 1), 0.0);
  EXPECT_EQ(diversity(far, radii), 0.0);
  EXPECT_THROW(fidelity(abs_diff({0, 1}, {0.5}), radii, 1), Error);
}

TEST(Metrics, SelfComparison) {
  Rng rng(3);
  for (int k : {1, 3, 5}) {
    Points x;
    for (int i = 0; i < 20; ++i) x.push_back(rng.uniform() * 100);
    const Eigen::MatrixXd d = abs_diff(x, x);
    const auto radii = knn_radii(d, k);
    EXPECT_DOUBLE_EQ(fidelity(d, radii, k), 1.0 + 1.0 / k);
    EXPECT_DOUBLE_EQ(diversity(d, radii), 1.0);
  }
}

TEST(Metrics, ScaleInvarianceAndMonotoneDiversity) {
  Rng rng(5);
  Points x, y;
  for (int i = 0; i < 15; ++i) x.push_back(rng.uniform());
  for (int j = 0; j < 6; ++j) y.push_back(rng.uniform() * 1.5);
  const Eigen::MatrixXd d = abs_diff(x, x), c = abs_diff(x, y);
  const auto r = knn_radii(d, 2);
  const auto r_scaled = knn_radii(d * 4.0, 2);
  EXPECT_EQ(fidelity_hits(c, r), fidelity_hits(c * 4.0, r_scaled));
  EXPECT_EQ(diversity_hits(c, r), diversity_hits(c * 4.0, r_scaled));
  double previous = 0.0;
  Points grow;
  for (double v : y) {
    grow.push_back(v);
    const double now = diversity(abs_diff(x, grow), r);
    EXPECT_GE(now, previous);
    previous = now;
  }
}

TEST(Bootstrap, IdentityResampleMatchesDirect) {
  Rng rng(7);
  Points x, y;
  for (int i = 0; i < 25; ++i) x.push_back(rng.uniform());
  for (int j = 0; j < 8; ++j) y.push_back(rng.uniform());
  EvalConfig cfg;
  cfg.bootstrap_B = 1;
  cfg.identity_resample = true;
  const MetricReport r = bootstrap_metrics(abs_diff(x, x), abs_diff(x, y), cfg);
  EXPECT_EQ(r.k, 1);
  const auto radii = knn_radii(abs_diff(x, x), 1);
  EXPECT_DOUBLE_EQ(r.fidelity, fidelity(abs_diff(x, y), radii, 1));
  EXPECT_DOUBLE_EQ(r.diversity, diversity(abs_diff(x, y), radii));
  EXPECT_EQ(r.fidelity_se, 0.0);
}

TEST(Bootstrap, DeterministicAndThreadIndependent) {
  Rng rng(9);
  Points x, y;
  for (int i = 0; i < 30; ++i) x.push_back(rng.uniform());
  for (int j = 0; j < 10; ++j) y.push_back(rng.uniform());
  EvalConfig cfg;
  cfg.bootstrap_B = 500;
  cfg.seed = 42;
  const MetricReport a = bootstrap_metrics(abs_diff(x, x), abs_diff(x, y), cfg);
  cfg.threads = 3;
  const MetricReport b = bootstrap_metrics(abs_diff(x, x), abs_diff(x, y), cfg);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_GT(a.fidelity_se, 0.0);
  EXPECT_LE(a.diversity, 1.0);
}

TEST(Bootstrap, KFromAlpha) {
  EvalConfig cfg;
  EXPECT_EQ(cfg.k_for(100), 5);
  EXPECT_EQ(cfg.k_for(10), 1);
  EXPECT_EQ(cfg.k_for(30), 2);  // 1.5 rounds up
  cfg.k_override = 3;
  EXPECT_EQ(cfg.k_for(100), 3);
}

TEST(Bootstrap, DegenerateResampleGivesUp) {
  EvalConfig cfg;
  cfg.bootstrap_B = 1;
  cfg.k_override = 1;
  // two identical rows still count as distinct indices; force one index
  const Eigen::MatrixXd d_real = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(2, 1);
  EXPECT_NO_THROW(bootstrap_metrics(d_real, cross, cfg));
}

TEST(ExpectedRank, TotalOrderAndTies) {
  const ScoreTable all_a{{"A", {{"s1", 3}, {"s2", 3}, {"s3", 3}}}, {"B", {{"s1", 1}, {"s2", 1}, {"s3", 1}}}};
  const auto r = expected_rank(all_a, true);
  EXPECT_DOUBLE_EQ(r.at("A"), 1.0);
  EXPECT_DOUBLE_EQ(r.at("B"), 2.0);
  const ScoreTable tie{{"A", {{"s1", 2}, {"s2", 5}}}, {"B", {{"s1", 2}, {"s2", 1}}}};
  const auto t = expected_rank(tie, true);
  EXPECT_DOUBLE_EQ(t.at("A"), (1.5 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(t.at("B"), (1.5 + 2.0) / 2);
  EXPECT_DOUBLE_EQ(expected_rank(tie, false).at("B"), (1.5 + 1.0) / 2);
  const ScoreTable missing{{"A", {{"s1", 2}}}, {"B", {{"s2", 1}}}};
  try {
    expected_rank(missing, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingScore);
  }
}

TEST(ExpectedRank, MatchesSortOracle) {
  Rng rng(11);
  ScoreTable scores;
  const std::vector<std::string> methods{"m1", "m2", "m3", "m4", "m5"};
  for (const auto& m : methods) {
    for (int s = 0; s < 6; ++s) scores[m]["s" + std::to_string(s)] = rng.uniform();
  }
  const auto ranks = expected_rank(scores, true);
  for (const auto& m : methods) {
    double total = 0;
    for (int s = 0; s < 6; ++s) {
      const std::string style = "s" + std::to_string(s);
      int better = 0;
      for (const auto& o : methods) better += scores[o][style] > scores[m][style];
      total += better + 1;
    }
    EXPECT_DOUBLE_EQ(ranks.at(m), total / 6);
  }
  EXPECT_EQ(rank_csv({{"a", 1.5}}), "method,expected_rank\na,1.500000\n");
}

TEST(Diagnostics, ArithmeticAndDegenerate) {
  grad::DistanceMatrix d;
  d.ids = {"a", "b", "c"};
  d.values.resize(3, 3);
  d.values << 0, 1, 2, 1, 0, 3, 2, 3, 0;
  const std::vector<std::string> ids{"a", "b", "c"};
  EXPECT_DOUBLE_EQ(input_diagnostics(d, ids, 0).mean_pairwise, 2.0);

  grad::DistanceMatrix eq;
  eq.ids = {"a", "b", "c", "d", "e"};
  eq.values = Eigen::MatrixXd::Constant(5, 5, 0.7);
  eq.values.diagonal().setZero();
  const std::vector<std::string> all{"a", "b", "c", "d", "e"};
  const Diagnostics dg = input_diagnostics(eq, all, 0);
  EXPECT_DOUBLE_EQ(dg.mean_pairwise, 0.7);
  EXPECT_NEAR(dg.best_silhouette, 0.0, 0.25);
  const std::vector<std::string> two{"a", "b"};
  EXPECT_THROW(input_diagnostics(eq, two, 0), Error);
}

TEST(Diagnostics, TightGroups) {
  Rng rng(13);
  std::vector<std::vector<double>> pts;
  for (int g = 0; g < 2; ++g) {
    for (int i = 0; i < 6; ++i) pts.push_back({g * 30 + rng.normal(), rng.normal()});
  }
  const grad::DistanceMatrix d = testing::euclidean_matrix(pts);
  EXPECT_GT(input_diagnostics(d, d.ids, 0).best_silhouette, 0.8);
}

TEST(Diagnostics, CurationBeatsRandomDraws) {
  Rng rng(17);
  std::vector<std::vector<double>> pts;
  for (int g = 0; g < 3; ++g) {
    for (int i = 0; i < 5; ++i) pts.push_back({g * 20 + rng.normal() * 0.5, rng.normal() * 0.5});
  }
  for (int i = 0; i < 30; ++i) pts.push_back({rng.uniform() * 60 - 10, rng.uniform() * 60 - 30});
  const grad::DistanceMatrix d = testing::euclidean_matrix(pts);
  std::vector<std::vector<std::string>> curated(3);
  for (std::size_t i = 0; i < 15; ++i) curated[i / 5].push_back(d.ids[i]);

  const CurationComparison c = compare_curation(d, curated, 5);
  EXPECT_LT(c.curated_mean_pairwise, c.random_mean_pairwise);
  EXPECT_GT(c.curated_silhouette, c.random_silhouette);
  EXPECT_GT(c.curated_silhouette, 0.8);
  EXPECT_EQ(compare_curation(d, curated, 5).to_json(), c.to_json());
}

}  // namespace
}  // namespace prism::evaluate
