#ifndef BLOCKGP_COMPOSITE_HPP
#define BLOCKGP_COMPOSITE_HPP

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "blockgp/common.hpp"
#include "blockgp/conditional.hpp"
#include "blockgp/data.hpp"
#include "blockgp/gp_full.hpp"
#include "blockgp/parallel.hpp"

namespace blockgp {

/// One Gaussian quadratic-form contribution. The weight matrix Q is kept in
/// factored form: either Q = M^{-1} with M = L L' (dense terms), or the
/// rank-one Q = s w w' of the weighted conditional terms. A term contributes
/// -(1/2)(d log s2 + logdet_part + (U - G b)' Q (U - G b) / s2).
struct ComponentTerm {
  enum class Kind { DenseInverse, RankOne };

  Kind kind = Kind::DenseInverse;
  Eigen::VectorXd upsilon;  // data-side residual seed
  Eigen::MatrixXd gamma;    // basis-side residual seed (rows match upsilon)
  int d = 0;                // log sigma^2 multiplicity
  double logdet_part = 0.0;

  Eigen::MatrixXd L;  // dense kind: lower Cholesky factor of M (Q = M^{-1})
  Eigen::VectorXd w;  // rank-one kind
  double s = 0.0;     // rank-one kind: 1' K^{-1} 1

  double quad(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd r = upsilon - gamma * beta;
    if (kind == Kind::DenseInverse) {
      return L.triangularView<Eigen::Lower>().solve(r).squaredNorm();
    }
    const double t = w.dot(r);
    return s * t * t;
  }

  double loglik(const Eigen::VectorXd& beta, double sigma2) const {
    return -0.5 * (d * std::log(sigma2) + logdet_part + quad(beta) / sigma2);
  }

  /// Materialized weight matrix, for tests.
  Eigen::MatrixXd weight_matrix() const {
    if (kind == Kind::RankOne) return s * (w * w.transpose());
    const int m = static_cast<int>(L.rows());
    const Eigen::MatrixXd Linv =
        L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(m, m));
    return Linv.transpose() * Linv;
  }
};

inline double terms_loglik(const std::vector<ComponentTerm>& terms, const Eigen::VectorXd& beta,
                           double sigma2) {
  double ll = 0.0;
  for (const auto& t : terms) ll += t.loglik(beta, sigma2);
  return ll;
}

inline int terms_dimension(const std::vector<ComponentTerm>& terms) {
  int d = 0;
  for (const auto& t : terms) d += t.d;
  return d;
}

namespace detail {

inline ComponentTerm dense_term(Eigen::VectorXd upsilon, Eigen::MatrixXd gamma,
                                Eigen::LLT<Eigen::MatrixXd> llt, double logdet) {
  ComponentTerm t;
  t.kind = ComponentTerm::Kind::DenseInverse;
  t.upsilon = std::move(upsilon);
  t.gamma = std::move(gamma);
  t.d = static_cast<int>(t.upsilon.size());
  t.L = llt.matrixL();
  t.logdet_part = logdet;
  return t;
}

}  // namespace detail

struct CompositeOptions {
  int threads = 1;
};

/// Marginal block terms: one per block, (y_i, F_i, K_i^{-1}, n_i, log|K_i|).
inline std::vector<ComponentTerm> cml_components(const Dataset& ds, const Partition& partition,
                                                 const BlockCache& cache,
                                                 const CompositeOptions& opts = {}) {
  (void)ds;
  (void)opts;
  const int k = partition.k();
  std::vector<ComponentTerm> terms(k);
  for (int i = 0; i < k; ++i) {
    const auto& b = cache.block(i);
    terms[i] = detail::dense_term(b.y, b.F, b.llt, b.logdet);
  }
  return terms;
}

/// Conditional block terms: one per ordered pair (i, j), j != i, holding the
/// density of block j given block i through the jittered Schur complement.
inline std::vector<ComponentTerm> ccl_components(const Dataset& ds, const Partition& partition,
                                                 const BlockCache& cache,
                                                 const CompositeOptions& opts = {}) {
  (void)ds;
  const int k = partition.k();
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (j != i) pairs.emplace_back(i, j);
    }
  }
  std::vector<ComponentTerm> terms(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), opts.threads, [&](int t) {
    const auto [i, j] = pairs[t];
    const auto& bi = cache.block(i);
    const auto& bj = cache.block(j);
    try {
      Eigen::MatrixXd cij_owned;  // K(X_i, X_j)
      const Eigen::MatrixXd* Cij;
      if (cache.has_cross() && i < j) {
        Cij = &cache.cross_upper(i, j);
      } else if (cache.has_cross()) {
        cij_owned = cache.cross_upper(j, i).transpose();
        Cij = &cij_owned;
      } else {
        cij_owned = corr_matrix(bi.X, bj.X, cache.phi());
        Cij = &cij_owned;
      }
      const Eigen::MatrixXd Kinv_Cij = bi.llt.solve(*Cij);
      const Eigen::VectorXd upsilon = bj.y - Cij->transpose() * bi.Kinv_y;
      const Eigen::MatrixXd gamma = bj.F - Cij->transpose() * bi.Kinv_F;
      Eigen::MatrixXd S = bj.K - Cij->transpose() * Kinv_Cij;
      auto llt = detail::cholesky_or_throw(std::move(S), cache.delta(), "ccl term");
      terms[t] = detail::dense_term(upsilon, gamma, llt, detail::logdet_from_llt(llt));
    } catch (const NumericalError& e) {
      throw NumericalError("ccl pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                           "): " + e.what());
    }
  });
  return terms;
}

/// Chain-rule composite terms: block 1 marginal, block 2 conditional on block
/// 1 (both exact), then one rank-one term per point of each later block r,
/// combining its conditionals on blocks 1..r-1 with minimum-variance weights.
inline std::vector<ComponentTerm> ci_components(const Dataset& ds, const Partition& partition,
                                                const BlockCache& cache,
                                                const CompositeOptions& opts = {}) {
  (void)ds;
  const int k = partition.k();
  // slot layout: [block 1][block 2][block 3 points]...[block k points]
  std::vector<int> offsets(k, 0);
  int total = (k >= 2) ? 2 : 1;
  for (int r = 2; r < k; ++r) {
    offsets[r] = total;
    total += partition.size(r);
  }
  std::vector<ComponentTerm> terms(total);

  {  // block 1: exact marginal
    const auto& b = cache.block(0);
    terms[0] = detail::dense_term(b.y, b.F, b.llt, b.logdet);
  }
  if (k >= 2) {  // block 2: exact conditional on block 1
    const auto& b1 = cache.block(0);
    const auto& b2 = cache.block(1);
    const Eigen::MatrixXd C21 = cache.cross(1, 0);
    const Eigen::MatrixXd Kinv_C12 = b1.llt.solve(C21.transpose());
    const Eigen::VectorXd upsilon = b2.y - C21 * b1.Kinv_y;
    const Eigen::MatrixXd gamma = b2.F - C21 * b1.Kinv_F;
    Eigen::MatrixXd S = b2.K - C21 * Kinv_C12;
    auto llt = detail::cholesky_or_throw(std::move(S), cache.delta(), "ci block 2");
    terms[1] = detail::dense_term(upsilon, gamma, llt, detail::logdet_from_llt(llt));
  }

  parallel_for(k - 2, opts.threads, [&](int rr) {
    const int r = rr + 2;  // 0-based block index, r >= 2 (third block onward)
    const auto& br = cache.block(r);
    const int nr = static_cast<int>(br.y.size());
    const int m = r;  // number of conditioning blocks
    const int q = cache.q();

    // S_i = K_i^{-1} K(X_i, X_r); lambda, mean seeds per conditioning block
    std::vector<Eigen::MatrixXd> S(m);
    std::vector<Eigen::MatrixXd> cir_owned;
    Eigen::MatrixXd lambda(m, nr), mean_data(m, nr);
    std::vector<Eigen::MatrixXd> mean_basis(m);  // nr x q each
    if (!cache.has_cross()) cir_owned.resize(m);
    for (int i = 0; i < m; ++i) {
      const auto& bi = cache.block(i);
      const Eigen::MatrixXd& Cir =
          cache.has_cross() ? cache.cross_upper(i, r)
                            : (cir_owned[i] = corr_matrix(bi.X, br.X, cache.phi()));
      S[i] = bi.llt.solve(Cir);
      lambda.row(i) = (Cir.array() * S[i].array()).colwise().sum();
      mean_data.row(i) = bi.y.transpose() * S[i];
      mean_basis[i] = S[i].transpose() * bi.F;
    }
    // cross entries: E_ij(s) = S_i(:,s)' K(X_i,X_j) S_j(:,s)
    std::vector<std::vector<Eigen::VectorXd>> E(m);
    for (int i = 0; i < m; ++i) {
      E[i].resize(m);
      for (int j = i + 1; j < m; ++j) {
        const Eigen::MatrixXd T = cache.cross_times(i, j, S[j]);  // n_i x n_r
        E[i][j] = (S[i].array() * T.array()).colwise().sum().transpose();
      }
    }

    for (int s = 0; s < nr; ++s) {
      Eigen::MatrixXd Krs(m, m);
      for (int i = 0; i < m; ++i) {
        Krs(i, i) = 1.0 - lambda(i, s);
        for (int j = i + 1; j < m; ++j) {
          const double v = 1.0 + E[i][j](s) - lambda(i, s) - lambda(j, s);
          Krs(i, j) = v;
          Krs(j, i) = v;
        }
      }
      OptimalWeights ow;
      try {
        ow = optimal_weights(Krs);
      } catch (const NumericalError& e) {
        throw NumericalError("ci term (block " + std::to_string(r + 1) + ", point " +
                             std::to_string(s + 1) + "): " + e.what());
      }
      ComponentTerm t;
      t.kind = ComponentTerm::Kind::RankOne;
      t.upsilon = Eigen::VectorXd::Constant(m, br.y(s)) - mean_data.col(s);
      t.gamma.resize(m, q);
      const Eigen::RowVectorXd fx = br.F.row(s);
      for (int i = 0; i < m; ++i) t.gamma.row(i) = fx - mean_basis[i].row(s);
      t.d = 1;
      t.w = ow.w;
      t.s = 1.0 / ow.varmin;
      t.logdet_part = -std::log(t.s);
      terms[offsets[r] + s] = std::move(t);
    }
  });
  return terms;
}

/// 1/n-scaled accumulators of the profile normal equations.
struct ChiAccumulators {
  Eigen::MatrixXd gg;  // q x q
  Eigen::VectorXd gu;  // q
  double uu = 0.0;
  int n_total = 0;
};

struct ProfileEstimates {
  Eigen::VectorXd beta_hat;
  double sigma2_hat = 0.0;
  ChiAccumulators chi;
};

/// beta_hat = chi_GG^{-1} chi_GU and
/// sigma2_hat = chi_UU + b' chi_GG b - 2 b' chi_GU, accumulated in term order.
inline ProfileEstimates profile_estimates(const std::vector<ComponentTerm>& terms) {
  if (terms.empty()) throw std::invalid_argument("profile_estimates: no terms");
  const int q = static_cast<int>(terms.front().gamma.cols());
  ChiAccumulators chi;
  chi.gg = Eigen::MatrixXd::Zero(q, q);
  chi.gu = Eigen::VectorXd::Zero(q);
  for (const auto& t : terms) {
    chi.n_total += t.d;
    if (t.kind == ComponentTerm::Kind::DenseInverse) {
      const Eigen::MatrixXd V = t.L.triangularView<Eigen::Lower>().solve(t.gamma);
      const Eigen::VectorXd u = t.L.triangularView<Eigen::Lower>().solve(t.upsilon);
      chi.gg.noalias() += V.transpose() * V;
      chi.gu.noalias() += V.transpose() * u;
      chi.uu += u.squaredNorm();
    } else {
      const Eigen::VectorXd gw = t.gamma.transpose() * t.w;
      const double uw = t.w.dot(t.upsilon);
      chi.gg.noalias() += t.s * (gw * gw.transpose());
      chi.gu.noalias() += (t.s * uw) * gw;
      chi.uu += t.s * uw * uw;
    }
  }
  if (chi.n_total < q + 1) {
    throw std::invalid_argument("profile_estimates: fewer than q+1 effective observations");
  }
  chi.gg /= chi.n_total;
  chi.gu /= chi.n_total;
  chi.uu /= chi.n_total;

  Eigen::LLT<Eigen::MatrixXd> llt(chi.gg);
  if (llt.info() != Eigen::Success) {
    throw IdentifiabilityError("profile_estimates: chi_GG is singular");
  }
  ProfileEstimates out;
  out.beta_hat = llt.solve(chi.gu);
  const double s2 =
      chi.uu + out.beta_hat.dot(chi.gg * out.beta_hat) - 2.0 * out.beta_hat.dot(chi.gu);
  out.sigma2_hat = std::max(s2, kSigma2Floor);
  out.chi = std::move(chi);
  return out;
}

/// Concentrated objective: n_total log sigma2_hat + sum of logdet parts.
/// Lower is better; -2 * (maximized log-likelihood) = objective + n_total.
inline double concentrated_objective(const std::vector<ComponentTerm>& terms, int n_total) {
  const ProfileEstimates prof = profile_estimates(terms);
  double logdets = 0.0;
  for (const auto& t : terms) logdets += t.logdet_part;
  return n_total * std::log(prof.sigma2_hat) + logdets;
}

enum class CompositeMethod { CI, CML, CCL };

inline std::string method_name(CompositeMethod m) {
  switch (m) {
    case CompositeMethod::CI: return "CI";
    case CompositeMethod::CML: return "CML";
    case CompositeMethod::CCL: return "CCL";
  }
  return "CI";
}

inline CompositeMethod method_from_name(const std::string& s) {
  if (s == "CI") return CompositeMethod::CI;
  if (s == "CML") return CompositeMethod::CML;
  if (s == "CCL") return CompositeMethod::CCL;
  throw std::invalid_argument("unknown composite method: " + s);
}

inline std::vector<ComponentTerm> composite_components(CompositeMethod method, const Dataset& ds,
                                                       const Partition& partition,
                                                       const BlockCache& cache,
                                                       const CompositeOptions& opts = {}) {
  switch (method) {
    case CompositeMethod::CI: return ci_components(ds, partition, cache, opts);
    case CompositeMethod::CML: return cml_components(ds, partition, cache, opts);
    case CompositeMethod::CCL: return ccl_components(ds, partition, cache, opts);
  }
  throw std::invalid_argument("composite_components: bad method");
}

/// Composite fit: minimizes the concentrated objective over log phi with the
/// same simplex and multi-start policy as the ML fit, rebuilding the block
/// cache and terms at every candidate phi.
inline FittedModel fit_composite(const Dataset& ds, const Partition& partition,
                                 CompositeMethod method, const BasisSpec& basis,
                                 const FitOptions& opts = {}) {
  ds.validate();
  partition.validate(ds.n());
  const auto t0 = std::chrono::steady_clock::now();
  const int p = ds.p();
  CacheOptions copts;
  copts.threads = opts.threads;
  copts.cross_blocks = (method != CompositeMethod::CML) && partition.k() > 1;
  CompositeOptions topts{opts.threads};

  auto build_terms = [&](const RoughnessParams& phi) {
    const BlockCache cache = build_cache(ds, partition, phi, basis, copts);
    return composite_components(method, ds, partition, cache, topts);
  };
  auto objective = [&](const Eigen::VectorXd& logphi) -> double {
    try {
      const RoughnessParams phi(logphi.array().exp().matrix().eval());
      const auto terms = build_terms(phi);
      return concentrated_objective(terms, terms_dimension(terms));
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const MultistartResult ms = multistart_minimize(objective, p, opts.seed, opts.multistart, opts.trace);
  if (ms.all_failed) {
    throw NumericalError("fit_composite(" + method_name(method) + "): every start failed");
  }

  FittedModel fit;
  fit.method = method_name(method);
  fit.basis = basis;
  fit.partition = partition;
  fit.params.phi = RoughnessParams(ms.best.x.array().exp().matrix().eval());
  const auto terms = build_terms(fit.params.phi);
  const ProfileEstimates prof = profile_estimates(terms);
  fit.params.beta = prof.beta_hat;
  fit.params.sigma2 = prof.sigma2_hat;
  fit.objective = ms.best.fval;
  fit.converged = ms.best.converged;
  fit.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return fit;
}

}  // namespace blockgp

#endif  // BLOCKGP_COMPOSITE_HPP
