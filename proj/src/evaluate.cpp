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

#include "prism/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "prism/error.hpp"
#include "prism/parallel.hpp"
#include "prism/random.hpp"

namespace prism::evaluate {
namespace {

void check_cross(const Eigen::MatrixXd& d_cross, std::span<const double> radii) {
  if (static_cast<std::size_t>(d_cross.rows()) != radii.size()) {
    fail(Errc::ShapeMismatch, "cross matrix has " + std::to_string(d_cross.rows()) + " rows but " +
                                  std::to_string(radii.size()) + " radii were given");
  }
  if (d_cross.cols() < 1) fail(Errc::ShapeMismatch, "cross matrix has no generated samples");
}

// k-th smallest distance from rows[a] to the other resampled rows.
std::vector<double> resampled_radii(const Eigen::MatrixXd& d, const std::vector<Eigen::Index>& rows, int k) {
  std::vector<double> radii(rows.size());
  std::vector<double> buf;
  buf.reserve(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    buf.clear();
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (b != a) buf.push_back(d(rows[a], rows[b]));
    }
    std::nth_element(buf.begin(), buf.begin() + (k - 1), buf.end());
    radii[a] = buf[k - 1];
  }
  return radii;
}

struct Sample {
  double fidelity;
  double diversity;
};

}  // namespace

void EvalConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::Config, "eval alpha must be in (0, 1)");
  if (k_override && *k_override < 1) fail(Errc::Config, "eval k override must be >= 1");
  if (bootstrap_B < 1) fail(Errc::Config, "bootstrap B must be >= 1");
  if (!inclusive_radius) fail(Errc::Config, "only inclusive radius comparison is supported");
}

int EvalConfig::k_for(int n) const {
  if (k_override) return *k_override;
  return std::max(1, static_cast<int>(std::floor(alpha * n + 0.5)));
}

nlohmann::json MetricReport::to_json() const {
  return {{"style", style},
          {"method", method},
          {"fidelity", fidelity},
          {"fidelity_se", fidelity_se},
          {"fidelity_sd", fidelity_sd},
          {"diversity", diversity},
          {"diversity_se", diversity_se},
          {"diversity_sd", diversity_sd},
          {"fidelity_full", fidelity_full},
          {"diversity_full", diversity_full},
          {"N", N},
          {"M", M},
          {"k", k},
          {"B", B}};
}

std::vector<double> knn_radii(const Eigen::MatrixXd& d_real, int k) {
  const auto n = d_real.rows();
  if (d_real.cols() != n) fail(Errc::ShapeMismatch, "real distance matrix must be square");
  if (k < 1) fail(Errc::InvalidArgument, "k must be >= 1");
  if (n < k + 1) fail(Errc::KTooLarge,
      "k=" + std::to_string(k) + " needs at least " + std::to_string(k + 1) + " real samples");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return resampled_radii(d_real, rows, k);
}

std::int64_t fidelity_hits(const Eigen::MatrixXd& d_cross, std::span<const double> radii) {
  check_cross(d_cross, radii);
  std::int64_t hits = 0;
  for (Eigen::Index j = 0; j < d_cross.cols(); ++j) {
    for (Eigen::Index i = 0; i < d_cross.rows(); ++i) hits += d_cross(i, j) <= radii[i];
  }
  return hits;
}

std::int64_t diversity_hits(const Eigen::MatrixXd& d_cross, std::span<const double> radii) {
  check_cross(d_cross, radii);
  std::int64_t hits = 0;
  for (Eigen::Index i = 0; i < d_cross.rows(); ++i) {
    for (Eigen::Index j = 0; j < d_cross.cols(); ++j) {
      if (d_cross(i, j) <= radii[i]) {
        ++hits;
        break;
      }
    }
  }
  return hits;
}

double fidelity(const Eigen::MatrixXd& d_cross, std::span<const double> radii, int k) {
  if (k < 1) fail(Errc::InvalidArgument, "k must be >= 1");
  const std::int64_t hits = fidelity_hits(d_cross, radii);
  return static_cast<double>(hits) / (static_cast<double>(k) * static_cast<double>(d_cross.cols()));
}

double diversity(const Eigen::MatrixXd& d_cross, std::span<const double> radii) {
  const std::int64_t hits = diversity_hits(d_cross, radii);
  return static_cast<double>(hits) / static_cast<double>(d_cross.rows());
}

MetricReport bootstrap_metrics(const Eigen::MatrixXd& d_real, const Eigen::MatrixXd& d_cross, const EvalConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<int>(d_real.rows());
  const auto m = static_cast<int>(d_cross.cols());
  if (d_real.cols() != n) fail(Errc::ShapeMismatch, "real distance matrix must be square");
  if (d_cross.rows() != n) fail(Errc::ShapeMismatch, "cross matrix rows must match the real set");
  if (n < 2 || m < 1) fail(Errc::InsufficientData, "bootstrap needs N >= 2 and M >= 1");
  const int k = cfg.k_for(n);
  if (n < k + 1) fail(Errc::KTooLarge,
      "k=" + std::to_string(k) + " needs at least " + std::to_string(k + 1) + " real samples");

  std::vector<Sample> samples(static_cast<std::size_t>(cfg.bootstrap_B));
  parallel_for(samples.size(), cfg.threads, [&](std::size_t b) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> cols(static_cast<std::size_t>(m));
    if (cfg.identity_resample) {
      std::iota(rows.begin(), rows.end(), 0);
      std::iota(cols.begin(), cols.end(), 0);
    } else {
      for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt == 100) fail(Errc::DegenerateResample, "100 consecutive real resamples had one distinct point");
        Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(b), attempt}));
        for (auto& r : rows) r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        for (auto& c : cols) c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
        if (std::any_of(rows.begin(), rows.end(), [&](Eigen::Index r) { return r != rows.front(); })) break;
      }
    }
    const std::vector<double> radii = resampled_radii(d_real, rows, k);
    Eigen::MatrixXd cross(n, m);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) cross(i, j) = d_cross(rows[i], cols[j]);
    }
    samples[b] = {fidelity(cross, radii, k), diversity(cross, radii)};
  });

  MetricReport report;
  report.N = n;
  report.M = m;
  report.k = k;
  report.B = cfg.bootstrap_B;
  const auto full_radii = knn_radii(d_real, k);
  report.fidelity_full = fidelity(d_cross, full_radii, k);
  report.diversity_full = diversity(d_cross, full_radii);
  const double count = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    report.fidelity += s.fidelity;
    report.diversity += s.diversity;
  }
  report.fidelity /= count;
  report.diversity /= count;
  if (samples.size() > 1) {
    double vf = 0.0, vd = 0.0;
    for (const auto& s : samples) {
      vf += (s.fidelity - report.fidelity) * (s.fidelity - report.fidelity);
      vd += (s.diversity - report.diversity) * (s.diversity - report.diversity);
    }
    report.fidelity_sd = std::sqrt(vf / (count - 1));
    report.diversity_sd = std::sqrt(vd / (count - 1));
    report.fidelity_se = report.fidelity_sd / std::sqrt(count);
    report.diversity_se = report.diversity_sd / std::sqrt(count);
  }
  return report;
}

std::map<std::string, double> expected_rank(const ScoreTable& scores, bool higher_better) {
  std::set<std::string> styles;
  for (const auto& [method, per_style] : scores) {
    for (const auto& [style, _] : per_style) styles.insert(style);
  }
  std::map<std::string, double> totals;
  for (const auto& [method, _] : scores) totals[method] = 0.0;
  for (const auto& style : styles) {
    std::vector<std::pair<double, std::string>> row;
    for (const auto& [method, per_style] : scores) {
      const auto it = per_style.find(style);
      if (it == per_style.end()) fail(Errc::MissingScore,
          "method \"" + method + "\" has no score for style \"" + style + "\"");
      row.emplace_back(higher_better ? -it->second : it->second, method);
    }
    std::sort(row.begin(), row.end());
    for (std::size_t a = 0; a < row.size();) {
      std::size_t b = a;
      while (b < row.size() && row[b].first == row[a].first) ++b;
      const double rank = (static_cast<double>(a + 1) + static_cast<double>(b)) / 2.0;
      for (std::size_t t = a; t < b; ++t) totals[row[t].second] += rank;
      a = b;
    }
  }
  if (!styles.empty()) {
    for (auto& [_, total] : totals) total /= static_cast<double>(styles.size());
  }
  return totals;
}

std::string rank_csv(const std::map<std::string, double>& ranks) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << "method,expected_rank\n";
  for (const auto& [method, rank] : ranks) out << method << ',' << rank << '\n';
  return out.str();
}

nlohmann::json Diagnostics::to_json() const {
  return {{"mean_pairwise", mean_pairwise}, {"best_silhouette", best_silhouette}, {"best_k", best_k}};
}

double mean_pairwise(const grad::DistanceMatrix& sub) {
  const auto n = static_cast<Eigen::Index>(sub.size());
  if (n < 2) fail(Errc::TooFewDesigns, "mean pairwise distance needs at least 2 designs");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) total += sub.values(i, j);
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

Diagnostics input_diagnostics(const grad::DistanceMatrix& d, std::span<const std::string> ids, std::uint64_t seed,
                              int k_max, const partition::KMedoidsOptions& opts) {
  if (ids.size() < 3) fail(Errc::TooFewDesigns, "diagnostics need at least 3 designs");
  const grad::DistanceMatrix sub = d.restrict_to(ids);
  const auto n = static_cast<Eigen::Index>(sub.size());
  Diagnostics out;
  out.mean_pairwise = mean_pairwise(sub);
  const int upper = std::min<int>(k_max, static_cast<int>(n) - 1);
  for (int k = 2; k <= upper; ++k) {
    const partition::Partition p = partition::k_medoids(sub, k, seed, opts);
    if (k == 2 || p.silhouette > out.best_silhouette) {
      out.best_silhouette = p.silhouette;
      out.best_k = k;
    }
  }
  return out;
}

nlohmann::json CurationComparison::to_json() const {
  return {{"curated_mean_pairwise", curated_mean_pairwise},
          {"random_mean_pairwise", random_mean_pairwise},
          {"curated_silhouette", curated_silhouette},
          {"random_silhouette", random_silhouette}};
}

CurationComparison compare_curation(const grad::DistanceMatrix& d,
                                    const std::vector<std::vector<std::string>>& curated_sets, std::uint64_t seed,
                                    int k_max, const partition::KMedoidsOptions& opts) {
  if (curated_sets.empty()) fail(Errc::TooFewDesigns, "no curated sets to compare");
  Rng rng(seed);
  auto draw = [&](std::size_t count) {
    if (count > d.size()) fail(Errc::TooFewDesigns, "random set larger than the style");
    std::vector<std::string> pool = d.ids;
    for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    pool.resize(count);
    return pool;
  };

  CurationComparison out;
  std::vector<std::string> uni;
  for (const auto& set : curated_sets) {
    out.curated_mean_pairwise += mean_pairwise(d.restrict_to(set));
    const auto random_set = draw(set.size());
    out.random_mean_pairwise += mean_pairwise(d.restrict_to(random_set));
    uni.insert(uni.end(), set.begin(), set.end());
  }
  out.curated_mean_pairwise /= static_cast<double>(curated_sets.size());
  out.random_mean_pairwise /= static_cast<double>(curated_sets.size());
  out.curated_silhouette = input_diagnostics(d, uni, seed, k_max, opts).best_silhouette;
  out.random_silhouette = input_diagnostics(d, draw(uni.size()), seed, k_max, opts).best_silhouette;
  return out;
}

}  // namespace prism::evaluate
