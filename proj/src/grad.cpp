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

#include "prism/grad.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "prism/binary_io.hpp"
#include "prism/digest.hpp"
#include "prism/error.hpp"
#include "prism/parallel.hpp"
#include "prism/transport.hpp"

namespace prism::grad {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Precomputed pieces of the square-loss structural term.
struct StructureTerms {
  const MatrixXd& ca;
  const MatrixXd& cb;
  MatrixXd ca_sq;
  MatrixXd cb_sq;

  StructureTerms(const MatrixXd& a, const MatrixXd& b)
      : ca(a), cb(b), ca_sq(a.array().square()), cb_sq(b.array().square()) {}

  // L(T)[i][j] = sum_kl (ca[i][k] - cb[j][l])^2 T[k][l]
  MatrixXd apply(const MatrixXd& t) const {
    const VectorXd rows = t.rowwise().sum();
    const VectorXd cols = t.colwise().sum().transpose();
    MatrixXd out = -2.0 * (ca * t * cb);
    out.colwise() += ca_sq * rows;
    out.rowwise() += (cb_sq * cols).transpose();
    return out;
  }

  // Symmetric bilinear form Q(A, B) = <A, L(B)>.
  double bilinear(const MatrixXd& a, const MatrixXd& b) const { return (a.array() * apply(b).array()).sum(); }
};

void check_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) fail(Errc::SolverDiverged, std::string("non-finite values in ") + what);
}

struct SinkhornPotentials {
  VectorXd alpha;
  VectorXd beta;
};

// Entropic OT with absorbed log-domain potentials. The kernel is
// exp((alpha_i + beta_j - G_ij) / eps); scalings u, v are folded into the
// potentials whenever they leave [1e-30, 1e30].
MatrixXd sinkhorn(const MatrixXd& cost, const VectorXd& p, const VectorXd& q, double eps, int max_iters,
                  double tol, SinkhornPotentials& pot) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  if (pot.alpha.size() != n || pot.beta.size() != m) {
    pot.alpha = VectorXd::Zero(n);
    pot.beta = VectorXd::Zero(m);
  }
  // c-transforms leave a unit kernel entry in every row and column.
  for (Eigen::Index i = 0; i < n; ++i) pot.alpha(i) = (cost.row(i).transpose() - pot.beta).minCoeff();
  for (Eigen::Index j = 0; j < m; ++j) pot.beta(j) = (cost.col(j) - pot.alpha).minCoeff();

  auto kernel = [&]() -> MatrixXd {
    MatrixXd k = -cost;
    k.colwise() += pot.alpha;
    k.rowwise() += pot.beta.transpose();
    return (k / eps).array().exp().matrix();
  };
  MatrixXd k = kernel();
  VectorXd u = VectorXd::Ones(n);
  VectorXd v = VectorXd::Ones(m);
  auto absorb = [&] {
    pot.alpha += eps * u.array().log().matrix();
    pot.beta += eps * v.array().log().matrix();
    u.setOnes();
    v.setOnes();
    k = kernel();
  };

  for (int it = 0; it < max_iters; ++it) {
    v = q.array() / (k.transpose() * u).array();
    u = p.array() / (k * v).array();
    if (!u.allFinite() || !v.allFinite()) fail(Errc::SolverDiverged, "Sinkhorn scaling overflow");
    if (u.maxCoeff() > 1e30 || v.maxCoeff() > 1e30 || u.minCoeff() < 1e-30 || v.minCoeff() < 1e-30) absorb();
    if (it % 10 == 9 || it + 1 == max_iters) {
      const double err = (v.array() * (k.transpose() * u).array() - q.array()).abs().sum();
      if (err < tol) break;
    }
  }
  absorb();
  return k;
}

// Projects an approximate coupling onto the exact marginals (p, q) without
// moving mass more than the marginal error.
MatrixXd round_to_marginals(MatrixXd t, const VectorXd& p, const VectorXd& q) {
  const VectorXd rows = t.rowwise().sum();
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    if (rows(i) > p(i)) t.row(i) *= p(i) / rows(i);
  }
  const VectorXd cols = t.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    if (cols(j) > q(j)) t.col(j) *= q(j) / cols(j);
  }
  const VectorXd err_rows = (p - t.rowwise().sum()).cwiseMax(0.0);
  const VectorXd err_cols = (q - t.colwise().sum().transpose()).cwiseMax(0.0);
  const double mass = err_rows.sum();
  if (mass > 0.0) t += err_rows * err_cols.transpose() / mass;
  return t;
}

}  // namespace

void GradParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(Errc::InvalidArgument, "grad lambda must be in [0, 1]");
  if (!(epsilon > 0.0)) fail(Errc::InvalidArgument, "grad epsilon must be > 0");
  if (max_outer_iters < 1 || max_sinkhorn_iters < 1) fail(Errc::InvalidArgument, "grad iteration limits must be >= 1");
  if (!(tol > 0.0)) fail(Errc::InvalidArgument, "grad tol must be > 0");
  if (polish_iters < 0) fail(Errc::InvalidArgument, "grad polish_iters must be >= 0");
}

std::string GradParams::hash() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "grad/v1 lambda=" << lambda << " epsilon=" << epsilon << " outer=" << max_outer_iters
     << " sinkhorn=" << max_sinkhorn_iters << " tol=" << tol << " seed=" << seed << " polish=" << polish_iters;
  return sha256_hex(ss.str()).substr(0, 16);
}

PatchGraph build_patch_graph(const ingest::PatchEmbeddings& emb) {
  if (emb.patch_count() < 1 || emb.dim() < 1) fail(Errc::InvalidArgument, "patch embeddings are empty");
  PatchGraph g;
  g.design_id = emb.design_id;
  g.features = emb.matrix;
  g.intra_cost = (MatrixXd::Ones(emb.patch_count(), emb.patch_count()) - g.features * g.features.transpose())
                     .cwiseMax(0.0)
                     .cwiseMin(2.0);
  g.intra_cost.diagonal().setZero();
  // exact symmetry regardless of GEMM rounding
  g.intra_cost = (0.5 * (g.intra_cost + g.intra_cost.transpose())).eval();
  g.weights = VectorXd::Constant(emb.patch_count(), 1.0 / static_cast<double>(emb.patch_count()));
  return g;
}

MatrixXd cross_cost(const PatchGraph& a, const PatchGraph& b) {
  if (a.features.cols() != b.features.cols()) {
    fail(Errc::ShapeMismatch, "embedding dims differ: " + std::to_string(a.features.cols()) + " vs " +
                                  std::to_string(b.features.cols()));
  }
  return (MatrixXd::Ones(a.size(), b.size()) - a.features * b.features.transpose()).cwiseMax(0.0);
}

double fused_gw_objective(const PatchGraph& a, const PatchGraph& b, const MatrixXd& coupling, double lambda) {
  const StructureTerms terms(a.intra_cost, b.intra_cost);
  const double feature = (coupling.array() * cross_cost(a, b).array()).sum();
  const double structure = lambda < 1.0 ? terms.bilinear(coupling, coupling) : 0.0;
  return lambda * feature + (1.0 - lambda) * structure;
}

namespace {

GradResult solve_oriented(const PatchGraph& a, const PatchGraph& b, const GradParams& params) {
  const MatrixXd features = cross_cost(a, b);
  const StructureTerms terms(a.intra_cost, b.intra_cost);
  const double lam = params.lambda;
  const VectorXd& p = a.weights;
  const VectorXd& q = b.weights;

  auto gradient = [&](const MatrixXd& t) -> MatrixXd {
    if (lam >= 1.0) return features;
    return lam * features + 2.0 * (1.0 - lam) * terms.apply(t);
  };
  auto objective = [&](const MatrixXd& t) {
    double v = lam * (t.array() * features.array()).sum();
    if (lam < 1.0) v += (1.0 - lam) * terms.bilinear(t, t);
    return v;
  };

  GradResult result;
  MatrixXd t = p * q.transpose();
  SinkhornPotentials potentials;

  // Entropic mirror descent: each step is a Sinkhorn projection of the
  // linearized objective.
  bool converged = false;
  for (int it = 0; it < params.max_outer_iters; ++it) {
    const MatrixXd g = gradient(t);
    check_finite(g, "gradient");
    MatrixXd next = sinkhorn(g, p, q, params.epsilon, params.max_sinkhorn_iters, params.tol, potentials);
    check_finite(next, "coupling");
    const double change = (next - t).norm();
    t = std::move(next);
    result.outer_iterations = it + 1;
    if (change < params.tol) {
      converged = true;
      break;
    }
  }
  result.iteration_limit = !converged;
  t = round_to_marginals(std::move(t), p, q);

  // Conditional-gradient polishing with exact linear minimization and exact
  // line search on the quadratic objective.
  for (int it = 0; it < params.polish_iters; ++it) {
    const MatrixXd g = gradient(t);
    MatrixXd vertex = exact_uniform_transport(g);
    const MatrixXd dir = vertex - t;
    const double gap = -(g.array() * dir.array()).sum();
    if (!(gap > 1e-13)) break;
    const double slope_feature = lam * (features.array() * dir.array()).sum();
    double quad = 0.0;
    double slope = slope_feature;
    if (lam < 1.0) {
      quad = (1.0 - lam) * terms.bilinear(dir, dir);
      slope += 2.0 * (1.0 - lam) * terms.bilinear(t, dir);
    }
    double step;
    if (quad > 0.0) {
      step = std::clamp(-slope / (2.0 * quad), 0.0, 1.0);
    } else {
      step = (quad + slope < 0.0) ? 1.0 : 0.0;
    }
    if (step <= 0.0) break;
    result.polish_iterations = it + 1;
    if (step >= 1.0) {
      t = std::move(vertex);
    } else {
      t += step * dir;
    }
  }

  check_finite(t, "final coupling");
  result.raw_value = objective(t);
  if (!std::isfinite(result.raw_value)) fail(Errc::SolverDiverged, "objective is not finite");
  result.value = std::max(0.0, result.raw_value);
  result.coupling = std::move(t);
  return result;
}

}  // namespace

// The objective is non-convex, so each orientation may settle in a different
// local optimum. Solving both and keeping the lower value makes the distance
// exactly symmetric.
GradResult grad_solve(const PatchGraph& a, const PatchGraph& b, const GradParams& params) {
  params.validate();
  if (a.size() < 1 || b.size() < 1) fail(Errc::InvalidArgument, "patch graphs must have at least one vertex");
  GradResult forward = solve_oriented(a, b, params);
  GradResult backward = solve_oriented(b, a, params);
  if (backward.raw_value < forward.raw_value) {
    backward.coupling.transposeInPlace();
    return backward;
  }
  return forward;
}

double grad_distance(const PatchGraph& a, const PatchGraph& b, const GradParams& params) {
  return grad_solve(a, b, params).value;
}

std::optional<std::size_t> DistanceMatrix::index_of(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

DistanceMatrix DistanceMatrix::restrict_to(std::span<const std::string> subset) const {
  DistanceMatrix out;
  out.ids.assign(subset.begin(), subset.end());
  std::vector<std::size_t> idx;
  idx.reserve(subset.size());
  for (const auto& id : subset) {
    const auto i = index_of(id);
    if (!i) fail(Errc::InvalidArgument, "id \"" + id + "\" not in distance matrix");
    idx.push_back(*i);
  }
  const auto n = static_cast<Eigen::Index>(idx.size());
  out.values.resize(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) out.values(r, c) = values(idx[r], idx[c]);
  }
  return out;
}

std::string encode_gdm1(const DistanceMatrix& m) {
  const auto n = static_cast<Eigen::Index>(m.ids.size());
  if (m.values.rows() != n || m.values.cols() != n)
      fail(Errc::ShapeMismatch, "distance matrix shape does not match ids");
  io::ByteWriter w;
  w.magic("GDM1");
  w.u32(static_cast<std::uint32_t>(n));
  for (const auto& id : m.ids) w.cstr(id);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) w.f32(static_cast<float>(m.values(r, c)));
  }
  return std::move(w).bytes();
}

DistanceMatrix decode_gdm1(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("GDM1");
  const std::uint32_t n = r.u32();
  DistanceMatrix m;
  m.ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) m.ids.push_back(r.cstr());
  r.need(static_cast<std::size_t>(n) * n * 4);
  m.values.resize(n, n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < n; ++j) m.values(i, j) = r.f32();
  }
  r.expect_end();
  return m;
}

void write_gdm1(const std::filesystem::path& path, const DistanceMatrix& m) {
  write_file_bytes(path.string(), encode_gdm1(m));
}

DistanceMatrix read_gdm1(const std::filesystem::path& path) {
  return decode_gdm1(read_file_bytes(path.string()), path.string());
}

std::string encode_gdc1(const CrossMatrix& m) {
  const auto n = static_cast<Eigen::Index>(m.row_ids.size());
  const auto k = static_cast<Eigen::Index>(m.col_ids.size());
  if (m.values.rows() != n || m.values.cols() != k) fail(Errc::ShapeMismatch, "cross matrix shape does not match ids");
  io::ByteWriter w;
  w.magic("GDC1");
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(k));
  for (const auto& id : m.row_ids) w.cstr(id);
  for (const auto& id : m.col_ids) w.cstr(id);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) w.f32(static_cast<float>(m.values(r, c)));
  }
  return std::move(w).bytes();
}

CrossMatrix decode_gdc1(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("GDC1");
  const std::uint32_t n = r.u32();
  const std::uint32_t k = r.u32();
  CrossMatrix m;
  for (std::uint32_t i = 0; i < n; ++i) m.row_ids.push_back(r.cstr());
  for (std::uint32_t j = 0; j < k; ++j) m.col_ids.push_back(r.cstr());
  r.need(static_cast<std::size_t>(n) * k * 4);
  m.values.resize(n, k);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < k; ++j) m.values(i, j) = r.f32();
  }
  r.expect_end();
  return m;
}

DistanceCache::DistanceCache(std::filesystem::path path, Kind kind) : path_(std::move(path)), kind_(kind) {
  if (!std::filesystem::exists(path_)) return;
  const std::string bytes = read_file_bytes(path_.string());
  if (kind_ == Kind::Square) {
    const DistanceMatrix m = decode_gdm1(bytes, path_.string());
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = i + 1; j < m.size(); ++j) store(m.ids[i], m.ids[j], m.values(i, j));
    }
  } else {
    const CrossMatrix m = decode_gdc1(bytes, path_.string());
    for (std::size_t i = 0; i < m.row_ids.size(); ++i) {
      for (std::size_t j = 0; j < m.col_ids.size(); ++j) store(m.row_ids[i], m.col_ids[j], m.values(i, j));
    }
  }
}

std::pair<std::string, std::string> DistanceCache::key(const std::string& a, const std::string& b) const {
  if (kind_ == Kind::Square && b < a) return {b, a};
  return {a, b};
}

std::optional<double> DistanceCache::lookup(const std::string& a, const std::string& b) const {
  const auto it = pairs_.find(key(a, b));
  if (it == pairs_.end()) return std::nullopt;
  return it->second;
}

void DistanceCache::store(const std::string& a, const std::string& b, double value) { pairs_[key(a, b)] = value; }

void DistanceCache::save(const DistanceMatrix& m) const { write_gdm1(path_, m); }

void DistanceCache::save(const CrossMatrix& m) const { write_file_bytes(path_.string(), encode_gdc1(m)); }

namespace {

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

struct PairJob {
  Eigen::Index row;
  Eigen::Index col;
  const PatchGraph* a;
  const PatchGraph* b;
};

// Solves the uncached jobs and writes results by job index.
void solve_jobs(std::vector<PairJob>& jobs, std::vector<double>& out, const GradParams& params,
                const PairwiseOptions& options, PairwiseStats& stats) {
  std::vector<char> limited(jobs.size(), 0);
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto cached = options.cache ? options.cache->lookup(jobs[i].a->design_id, jobs[i].b->design_id)
                                      : std::nullopt;
    if (cached) {
      out[i] = *cached;
      ++stats.cache_hits;
    } else {
      todo.push_back(i);
    }
  }
  parallel_for(todo.size(), options.threads, [&](std::size_t t) {
    const PairJob& job = jobs[todo[t]];
    try {
      const GradResult r = grad_solve(*job.a, *job.b, params);
      out[todo[t]] = quantize(r.value);
      limited[todo[t]] = r.iteration_limit ? 1 : 0;
    } catch (const Error& e) {
      throw e.with_context("pair (" + job.a->design_id + ", " + job.b->design_id + ")");
    }
  });
  stats.solver_calls += todo.size();
  for (std::size_t i : todo) {
    stats.iteration_limit_pairs += limited[i];
    if (options.cache) options.cache->store(jobs[i].a->design_id, jobs[i].b->design_id, out[i]);
  }
}

}  // namespace

DistanceMatrix pairwise_distances(std::span<const PatchGraph> graphs, const GradParams& params,
                                  const PairwiseOptions& options, PairwiseStats* stats) {
  params.validate();
  const std::size_t n = graphs.size();
  if (n < 2) fail(Errc::InvalidArgument, "pairwise distances need at least two graphs");
  DistanceMatrix m;
  for (const auto& g : graphs) m.ids.push_back(g.design_id);
  {
    auto sorted = m.ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      fail(Errc::DuplicateId, "pairwise distances need distinct design ids");
    }
  }
  std::vector<PairJob> jobs;
  jobs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      jobs.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), &graphs[i], &graphs[j]});
    }
  }
  std::vector<double> out(jobs.size(), 0.0);
  PairwiseStats local;
  solve_jobs(jobs, out, params, options, local);

  m.values = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    m.values(jobs[k].row, jobs[k].col) = out[k];
    m.values(jobs[k].col, jobs[k].row) = out[k];
  }
  if (stats) {
    stats->solver_calls += local.solver_calls;
    stats->cache_hits += local.cache_hits;
    stats->iteration_limit_pairs += local.iteration_limit_pairs;
  }
  return m;
}

CrossMatrix cross_distances(std::span<const PatchGraph> rows, std::span<const PatchGraph> cols,
                            const GradParams& params, const PairwiseOptions& options, PairwiseStats* stats) {
  params.validate();
  CrossMatrix m;
  for (const auto& g : rows) m.row_ids.push_back(g.design_id);
  for (const auto& g : cols) m.col_ids.push_back(g.design_id);
  std::vector<PairJob> jobs;
  jobs.reserve(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      jobs.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), &rows[i], &cols[j]});
    }
  }
  std::vector<double> out(jobs.size(), 0.0);
  PairwiseStats local;
  solve_jobs(jobs, out, params, options, local);
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < jobs.size(); ++k) m.values(jobs[k].row, jobs[k].col) = out[k];
  if (stats) {
    stats->solver_calls += local.solver_calls;
    stats->cache_hits += local.cache_hits;
    stats->iteration_limit_pairs += local.iteration_limit_pairs;
  }
  return m;
}

}  // namespace prism::grad
