#ifndef BLOCKGP_PREDICT_HPP
#define BLOCKGP_PREDICT_HPP

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "blockgp/common.hpp"
#include "blockgp/conditional.hpp"
#include "blockgp/data.hpp"

namespace blockgp {

/// Data of the reformulated weight program:
///   Lambda_ij = K(x*,X_i) K_i^{-1} K(X_i,X_j) K_j^{-1} K(X_j,x*),
///   lambda_i  = K(x*,X_i) K_i^{-1} K(X_i,x*).
/// The conditional-mean seeds ride along when assembled from a cache so the
/// predictors need a single pass; synthetic systems may leave them empty.
struct LambdaSystem {
  Eigen::MatrixXd Lambda;
  Eigen::VectorXd lambda;
  // optional prediction seeds (per block)
  Eigen::VectorXd mean_data;   // a_i' K_i^{-1} y_i
  Eigen::MatrixXd mean_basis;  // rows a_i' K_i^{-1} F_i
  Eigen::RowVectorXd fx;       // f(x*)'

  int k() const { return static_cast<int>(lambda.size()); }
  bool has_means() const { return mean_data.size() == lambda.size() && lambda.size() > 0; }
};

/// Assemble Lambda/lambda from cached per-block solves; each unordered pair is
/// computed once.
inline LambdaSystem lambda_system(const BlockCache& cache, const Eigen::VectorXd& xstar) {
  const int k = cache.k();
  LambdaSystem sys;
  sys.Lambda.resize(k, k);
  sys.lambda.resize(k);
  sys.mean_data.resize(k);
  sys.mean_basis.resize(k, cache.q());
  sys.fx = cache.basis().row(xstar);
  std::vector<Eigen::VectorXd> b(k);
  for (int i = 0; i < k; ++i) {
    const auto& blk = cache.block(i);
    const Eigen::VectorXd a = corr_matrix(xstar.transpose(), blk.X, cache.phi()).transpose();
    b[i] = blk.llt.solve(a);
    sys.lambda(i) = a.dot(b[i]);
    sys.mean_data(i) = a.dot(blk.Kinv_y);
    sys.mean_basis.row(i) = a.transpose() * blk.Kinv_F;
  }
  for (int i = 0; i < k; ++i) {
    // the block's self-covariance is the jittered factor the solves use, so
    // Lambda_ii = a_i' K_i^{-1} (K_i) K_i^{-1} a_i collapses to lambda_i
    sys.Lambda(i, i) = sys.lambda(i);
    for (int j = i + 1; j < k; ++j) {
      const double v = b[i].dot(cache.cross_times(i, j, b[j]));
      sys.Lambda(i, j) = v;
      sys.Lambda(j, i) = v;
    }
  }
  return sys;
}

struct BlubpWeights {
  Eigen::VectorXd omega;       // sums to 1
  double varfactor = 0.0;      // unit-sigma^2 predictive variance, clamped
  double varfactor_pre_clamp = 0.0;
  bool jittered = false;       // Lambda needed a jitter retry
};

/// Lagrange solution of min w'Lambda w - 2 lambda'w s.t. 1'w = 1:
///   omega = ((1 - 1'L^-1 lambda) / (1'L^-1 1)) L^-1 1 + L^-1 lambda.
/// Lambda is positive definite for distinct design points and is factored
/// directly. When it is singular at double precision (blocks decorrelated
/// from x*, duplicated points) a jittered solve provides a second candidate;
/// the returned weights are whichever candidate achieves the lower objective,
/// and the variance factor is the objective those weights actually achieve.
inline BlubpWeights blubp_weights(const LambdaSystem& sys) {
  const int k = sys.k();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
  auto objective = [&](const Eigen::VectorXd& w) {
    return w.dot(sys.Lambda * w) - 2.0 * sys.lambda.dot(w) + 1.0;
  };
  auto lagrange = [&](const Eigen::LLT<Eigen::MatrixXd>& llt,
                      Eigen::VectorXd& omega) -> bool {
    const Eigen::VectorXd u = llt.solve(ones);
    const Eigen::VectorXd v = llt.solve(sys.lambda);
    const double s = u.sum();
    if (!(s > 0.0) || !std::isfinite(s)) return false;
    omega = ((1.0 - v.sum()) / s) * u + v;
    omega /= omega.sum();
    return omega.allFinite();
  };

  // squared pivot ratio, a cheap conditioning estimate for the SPD factor
  auto pivot_cond = [](const Eigen::LLT<Eigen::MatrixXd>& f) {
    const Eigen::VectorXd d = f.matrixLLT().diagonal();
    const double mx = d.maxCoeff(), mn = d.minCoeff();
    if (!(mn > 0.0)) return std::numeric_limits<double>::infinity();
    return (mx / mn) * (mx / mn);
  };

  BlubpWeights out;
  bool have = false;
  bool direct_trusted = false;
  Eigen::LLT<Eigen::MatrixXd> llt(sys.Lambda);
  if (llt.info() == Eigen::Success && lagrange(llt, out.omega)) {
    have = true;
    direct_trusted = pivot_cond(llt) < 1e9;
  }
  if (!direct_trusted) {
    // Lambda is (numerically) singular: x* at or next to a design point, a
    // block decorrelated from x*, or duplicated points. The regularized
    // program is then the meaningful one.
    Eigen::MatrixXd M = sys.Lambda;
    M.diagonal().array() += matrix_jitter(k);
    Eigen::LLT<Eigen::MatrixXd> jllt(M);
    Eigen::VectorXd omega_j;
    if (jllt.info() == Eigen::Success && lagrange(jllt, omega_j)) {
      if (!have || objective(omega_j) <= objective(out.omega)) {
        out.omega = omega_j;
        out.jittered = true;
      }
      have = true;
    }
  }
  if (!have) throw NumericalError("blubp_weights: Lambda not solvable even after jitter");
  out.varfactor_pre_clamp = objective(out.omega);
  out.varfactor = std::max(out.varfactor_pre_clamp, 0.0);
  return out;
}

/// Positive-definiteness certificate for Lambda (pre-jitter): the smallest
/// eigenvalue. Reports, never throws.
inline double check_lambda_pd(const LambdaSystem& sys) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.Lambda, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

namespace detail {

/// Relative-distance exact-hit scan; returns (block, row) of a design point
/// within tol of x*, if any.
inline std::optional<std::pair<int, int>> find_exact_hit(const BlockCache& cache,
                                                         const Eigen::VectorXd& xstar,
                                                         double tol = 1e-12) {
  const double scale = std::max(xstar.norm(), 1.0);
  for (int i = 0; i < cache.k(); ++i) {
    const auto& X = cache.block(i).X;
    for (int r = 0; r < X.rows(); ++r) {
      if ((X.row(r).transpose() - xstar).norm() <= tol * scale) return std::make_pair(i, r);
    }
  }
  return std::nullopt;
}

inline double combine_mean(const LambdaSystem& sys, const Eigen::VectorXd& weights,
                           const GpParams& params) {
  const double fx_beta = sys.fx.dot(params.beta);
  double mean = fx_beta;
  for (int i = 0; i < sys.k(); ++i) {
    mean += weights(i) * (sys.mean_data(i) - sys.mean_basis.row(i).dot(params.beta));
  }
  return mean;
}

inline Eigen::VectorXd block_cond_means(const LambdaSystem& sys, const GpParams& params) {
  const double fx_beta = sys.fx.dot(params.beta);
  Eigen::VectorXd m(sys.k());
  for (int i = 0; i < sys.k(); ++i) {
    m(i) = fx_beta + sys.mean_data(i) - sys.mean_basis.row(i).dot(params.beta);
  }
  return m;
}

}  // namespace detail

/// Best linear unbiased block predictor:
/// mean = f(x*)'beta + sum_i omega_i (cond_mean_i - f(x*)'beta), variance =
/// sigma^2 varfactor. Exact design-point hits return the observed response.
inline PredictionResult predict_blubp(const BlockCache& cache, const GpParams& params,
                                      const Eigen::VectorXd& xstar) {
  params.validate();
  PredictionResult out;
  if (const auto hit = detail::find_exact_hit(cache, xstar)) {
    out.mean = cache.block(hit->first).y(hit->second);
    out.variance = 0.0;
    out.variance_pre_clamp = 0.0;
    out.exact_hit = true;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(cache.k());
    w(hit->first) = 1.0;
    out.weights = w;
    return out;
  }
  const LambdaSystem sys = lambda_system(cache, xstar);
  const BlubpWeights bw = blubp_weights(sys);
  out.mean = detail::combine_mean(sys, bw.omega, params);
  out.variance_pre_clamp = params.sigma2 * bw.varfactor_pre_clamp;
  out.variance = params.sigma2 * bw.varfactor;
  out.weights = bw.omega;
  out.block_cond_means = detail::block_cond_means(sys, params);
  return out;
}

/// Composite-likelihood predictor with prior weights omega (default equal):
/// W_i proportional to omega_i / (1 - lambda_i), normalized to unit sum; the
/// variance is reported through the same quadratic form as the block
/// predictor, W'Lambda W - 2 lambda'W + 1, so the two are comparable.
inline PredictionResult predict_cl(const BlockCache& cache, const GpParams& params,
                                   const Eigen::VectorXd& xstar,
                                   const std::optional<Eigen::VectorXd>& prior = std::nullopt) {
  params.validate();
  const int k = cache.k();
  Eigen::VectorXd omega =
      prior.value_or(Eigen::VectorXd::Constant(k, 1.0 / k));
  if (omega.size() != k) throw std::invalid_argument("predict_cl: prior weight size mismatch");
  if ((omega.array() < 0.0).any() || std::abs(omega.sum() - 1.0) > 1e-8) {
    throw std::invalid_argument("predict_cl: prior weights must be nonnegative and sum to 1");
  }
  PredictionResult out;
  if (const auto hit = detail::find_exact_hit(cache, xstar)) {
    out.mean = cache.block(hit->first).y(hit->second);
    out.variance = 0.0;
    out.variance_pre_clamp = 0.0;
    out.exact_hit = true;
    return out;
  }
  const LambdaSystem sys = lambda_system(cache, xstar);
  // x* effectively inside one block: that block's conditional is returned
  for (int i = 0; i < k; ++i) {
    if (sys.lambda(i) >= 1.0 - 1e-12) {
      out.fallback = true;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
      w(i) = 1.0;
      out.mean = detail::combine_mean(sys, w, params);
      out.variance_pre_clamp = params.sigma2 * (1.0 - sys.lambda(i));
      out.variance = std::max(out.variance_pre_clamp, 0.0);
      out.weights = w;
      out.block_cond_means = detail::block_cond_means(sys, params);
      return out;
    }
  }
  Eigen::VectorXd W = (omega.array() / (1.0 - sys.lambda.array())).matrix();
  W /= W.sum();
  out.mean = detail::combine_mean(sys, W, params);
  const double quad = W.dot(sys.Lambda * W) - 2.0 * sys.lambda.dot(W) + 1.0;
  out.variance_pre_clamp = params.sigma2 * quad;
  out.variance = std::max(out.variance_pre_clamp, 0.0);
  out.weights = W;
  out.block_cond_means = detail::block_cond_means(sys, params);
  return out;
}

}  // namespace blockgp

#endif  // BLOCKGP_PREDICT_HPP
