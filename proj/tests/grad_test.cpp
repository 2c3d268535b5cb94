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

#include <filesystem>

#include "prism/error.hpp"
#include "prism/grad.hpp"
#include "prism/transport.hpp"
#include "support.hpp"

namespace prism::grad {
namespace {

using testing::brute_force_assignment;
using testing::graph_from;
using testing::random_graph;

TEST(PatchGraph, CosineEdges) {
  Eigen::MatrixXd rows(3, 2);
  rows << 1, 0, 0, 1, -1, 0;
  const PatchGraph g = graph_from("g", rows);
  EXPECT_DOUBLE_EQ(g.intra_cost(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(g.intra_cost(0, 2), 2.0);
  EXPECT_DOUBLE_EQ(g.intra_cost(1, 1), 0.0);
  EXPECT_NEAR(g.weights.sum(), 1.0, 1e-12);

  Eigen::MatrixXd same(2, 2);
  same << 0.6, 0.8, 0.6, 0.8;
  EXPECT_NEAR(graph_from("s", same).intra_cost.cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(ExactTransport, MatchesPermutationOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(8));
    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < cost.size(); ++i) cost(i) = rng.uniform() * 2.0;
    const Eigen::MatrixXd t = exact_uniform_transport(cost);
    EXPECT_NEAR((t.array() * cost.array()).sum(), brute_force_assignment(cost), 1e-12);
    EXPECT_NEAR((t.rowwise().sum().array() - 1.0 / n).abs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(ExactTransport, RectangularMarginals) {
  Rng rng(11);
  Eigen::MatrixXd cost(3, 5);
  for (Eigen::Index i = 0; i < cost.size(); ++i) cost(i) = rng.uniform();
  const Eigen::MatrixXd t = exact_uniform_transport(cost);
  EXPECT_NEAR((t.rowwise().sum().array() - 1.0 / 3).abs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR((t.colwise().sum().array() - 1.0 / 5).abs().maxCoeff(), 0.0, 1e-12);
}

TEST(ExactTransport, RectangularMatchesExpandedAssignment) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd cost(2, 3);
    for (Eigen::Index i = 0; i < cost.size(); ++i) cost(i) = rng.uniform();
    // Each row copied 3 times, each column twice: a 6x6 assignment.
    Eigen::MatrixXd expanded(6, 6);
    for (Eigen::Index r = 0; r < 6; ++r)
      for (Eigen::Index c = 0; c < 6; ++c) expanded(r, c) = cost(r / 3, c / 2);
    const Eigen::MatrixXd t = exact_uniform_transport(cost);
    EXPECT_NEAR((t.array() * cost.array()).sum(), brute_force_assignment(expanded), 1e-12);
  }
}

TEST(GradDistance, SelfDistanceIsZero) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const PatchGraph g = random_graph(rng, "g", 2 + static_cast<Eigen::Index>(rng.below(7)), 8);
    EXPECT_LE(grad_distance(g, g, {}), 1e-6);
  }
}

TEST(GradDistance, FeatureOnlyPermutedBasis) {
  Eigen::MatrixXd a(2, 4), b(2, 4);
  a << 1, 0, 0, 0, 0, 1, 0, 0;
  b << 0, 1, 0, 0, 1, 0, 0, 0;
  GradParams p;
  p.lambda = 1.0;
  EXPECT_NEAR(grad_distance(graph_from("a", a), graph_from("b", b), p), 0.0, 1e-6);

  Eigen::MatrixXd c(2, 4);
  c << 0, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_NEAR(grad_distance(graph_from("a", a), graph_from("c", c), p), 1.0, 1e-4);
}

TEST(GradDistance, FeatureOnlyMatchesAssignment) {
  Rng rng(3);
  GradParams p;
  p.lambda = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(5));
    const PatchGraph a = random_graph(rng, "a", n, 6);
    const PatchGraph b = random_graph(rng, "b", n, 6);
    const GradResult r = grad_solve(a, b, p);
    const double oracle = brute_force_assignment(cross_cost(a, b));
    EXPECT_NEAR(r.value, oracle, 1e-4);
    EXPECT_GE(r.raw_value, oracle - 1e-6);
  }
}

TEST(GradDistance, SymmetricAndPermutationInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const PatchGraph a = random_graph(rng, "a", 5, 8);
    const PatchGraph b = random_graph(rng, "b", 6, 8);
    const double ab = grad_distance(a, b, {});
    EXPECT_NEAR(ab, grad_distance(b, a, {}), 1e-5);

    Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
    perm.setIdentity();
    for (Eigen::Index i = 5; i > 0; --i)
        std::swap(perm.indices()[i], perm.indices()[static_cast<Eigen::Index>(rng.below(i + 1))]);
    const PatchGraph b_perm = graph_from("b", perm * b.features);
    EXPECT_NEAR(ab, grad_distance(a, b_perm, {}), 1e-5);
  }
}

TEST(GradDistance, ObjectiveMatchesNaiveSum) {
  Rng rng(9);
  const PatchGraph a = random_graph(rng, "a", 3, 4);
  const PatchGraph b = random_graph(rng, "b", 4, 4);
  const GradResult r = grad_solve(a, b, {});
  const Eigen::MatrixXd c = cross_cost(a, b);
  double feature = 0.0, structure = 0.0;
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 4; ++q) {
      feature += c(p, q) * r.coupling(p, q);
      for (int pp = 0; pp < 3; ++pp) {
        for (int qq = 0; qq < 4; ++qq) {
          const double d = a.intra_cost(p, pp) - b.intra_cost(q, qq);
          structure += d * d * r.coupling(p, q) * r.coupling(pp, qq);
        }
      }
    }
  }
  EXPECT_NEAR(r.raw_value, 0.5 * feature + 0.5 * structure, 1e-10);
  EXPECT_NEAR(fused_gw_objective(a, b, r.coupling, 0.5), r.raw_value, 1e-12);
}

TEST(GradDistance, InterpolationTowardTargetDoesNotIncrease) {
  Rng rng(13);
  const Eigen::MatrixXd target = testing::random_unit_rows(rng, 4, 5);
  const Eigen::MatrixXd start = testing::random_unit_rows(rng, 4, 5);
  GradParams p;
  p.lambda = 1.0;
  const PatchGraph goal = graph_from("t", target);
  double previous = INFINITY;
  for (int step = 0; step <= 10; ++step) {
    const double s = step / 10.0;
    Eigen::MatrixXd rows(4, 5);
    for (Eigen::Index r = 0; r < 4; ++r) {
      const double omega = std::acos(std::clamp(start.row(r).dot(target.row(r)), -1.0, 1.0));
      if (omega < 1e-9) {
        rows.row(r) = target.row(r);
      } else {
        rows.row(r) = (std::sin((1 - s) * omega) * start.row(r) + std::sin(s * omega) * target.row(r))
            / std::sin(omega);
      }
    }
    const double d = grad_distance(graph_from("m", rows), goal, p);
    EXPECT_LE(d, previous + 1e-4);
    previous = d;
  }
}

TEST(GradParams, RejectsInvalid) {
  GradParams p;
  p.lambda = 1.5;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.epsilon = 0.0;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_NE(GradParams{}.hash(), p.hash());
}

TEST(Pairwise, IdenticalGraphsGiveZeroMatrix) {
  Rng rng(2);
  const Eigen::MatrixXd rows = testing::random_unit_rows(rng, 4, 6);
  std::vector<PatchGraph> graphs{graph_from("a", rows), graph_from("b", rows), graph_from("c", rows)};
  const DistanceMatrix m = pairwise_distances(graphs, {});
  EXPECT_LE(m.values.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(m.values(0, 0), 0.0);
}

TEST(Pairwise, WarmCacheSkipsSolver) {
  Rng rng(4);
  std::vector<PatchGraph> graphs;
  for (int i = 0; i < 4; ++i) graphs.push_back(random_graph(rng, "g" + std::to_string(i), 4, 6));
  const auto path = std::filesystem::temp_directory_path() / "prism_grad_cache_test.gdm1";
  std::filesystem::remove(path);

  PairwiseStats cold;
  DistanceMatrix first;
  {
    DistanceCache cache(path, DistanceCache::Kind::Square);
    first = pairwise_distances(graphs, {}, {&cache, 2}, &cold);
    cache.save(first);
  }
  EXPECT_EQ(cold.solver_calls, 6u);
  EXPECT_NEAR(first.values(0, 1), static_cast<float>(grad_distance(graphs[0], graphs[1], {})), 0.0);

  DistanceCache warm_cache(path, DistanceCache::Kind::Square);
  PairwiseStats warm;
  const DistanceMatrix second = pairwise_distances(graphs, {}, {&warm_cache, 1}, &warm);
  EXPECT_EQ(warm.solver_calls, 0u);
  EXPECT_EQ(warm.cache_hits, 6u);
  EXPECT_EQ(first.values, second.values);
  EXPECT_EQ(encode_gdm1(first), encode_gdm1(second));
  std::filesystem::remove(path);
}

TEST(Pairwise, RejectsDuplicateIds) {
  Rng rng(6);
  std::vector<PatchGraph> graphs{random_graph(rng, "a", 2, 3), random_graph(rng, "a", 2, 3)};
  EXPECT_THROW(pairwise_distances(graphs, {}), Error);
}

TEST(Gdm1, RoundTripAndCorruption) {
  DistanceMatrix m;
  m.ids = {"x", "y"};
  m.values.resize(2, 2);
  m.values << 0, 0.25, 0.25, 0;
  const std::string bytes = encode_gdm1(m);
  EXPECT_EQ(bytes.substr(0, 4), "GDM1");
  EXPECT_EQ(bytes.size(), 4u + 4u + 2u + 2u + 16u);
  const DistanceMatrix back = decode_gdm1(bytes, "mem");
  EXPECT_EQ(back.ids, m.ids);
  EXPECT_EQ(back.values, m.values);
  EXPECT_THROW(decode_gdm1(bytes.substr(0, bytes.size() - 1), "mem"), Error);
  EXPECT_THROW(decode_gdm1(bytes + "z", "mem"), Error);
  EXPECT_THROW(decode_gdm1("GDMX" + bytes.substr(4), "mem"), Error);
}

TEST(Gdc1, CrossCacheKeepsOrder) {
  CrossMatrix m;
  m.row_ids = {"r0", "r1"};
  m.col_ids = {"c0"};
  m.values.resize(2, 1);
  m.values << 0.5, 0.75;
  const CrossMatrix back = decode_gdc1(encode_gdc1(m), "mem");
  EXPECT_EQ(back.row_ids, m.row_ids);
  EXPECT_EQ(back.col_ids, m.col_ids);
  EXPECT_EQ(back.values, m.values);
}

}  // namespace
}  // namespace prism::grad
