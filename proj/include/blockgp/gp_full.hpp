#ifndef BLOCKGP_GP_FULL_HPP
#define BLOCKGP_GP_FULL_HPP

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>

#include "blockgp/common.hpp"
#include "blockgp/data.hpp"
#include "blockgp/design.hpp"
#include "blockgp/kernel.hpp"
#include "blockgp/optimize.hpp"
#include "blockgp/rng.hpp"

namespace blockgp {

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> cholesky_or_throw(Eigen::MatrixXd M, double delta,
                                                     const std::string& what) {
  M.diagonal().array() += delta;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(what + ": Cholesky failed after jitter " + std::to_string(delta) +
                         " (dim " + std::to_string(M.rows()) + ")");
  }
  return llt;
}

inline double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// Log-likelihood of the GP model, up to the additive -(n/2) log 2*pi:
/// -(1/2)(n log s2 + log|R| + (y - F b)' R^{-1} (y - F b) / s2),
/// computed through the Cholesky factor of the jittered correlation matrix.
inline double full_loglik(const Dataset& ds, const GpParams& params, const BasisSpec& basis) {
  params.validate();
  const int n = ds.n();
  const auto llt =
      detail::cholesky_or_throw(corr_matrix(ds.X, ds.X, params.phi), dataset_jitter(n), "full_loglik");
  const Eigen::MatrixXd F = basis_matrix(ds.X, basis);
  const Eigen::VectorXd r = ds.y - F * params.beta;
  const Eigen::VectorXd u = llt.matrixL().solve(r);
  return -0.5 * (n * std::log(params.sigma2) + detail::logdet_from_llt(llt) +
                 u.squaredNorm() / params.sigma2);
}

struct FitOptions {
  std::uint64_t seed = 0;
  MultistartOptions multistart;
  int dense_cap = 5000;    // largest n the dense ML path accepts
  int threads = 1;
  TraceFn trace;           // optional per-iteration trace
};

namespace detail {

struct ProfiledObjective {
  double objective;  // n log s2_hat + log|R|
  Eigen::VectorXd beta_hat;
  double sigma2_hat;
};

/// Profile beta and sigma^2 out of the full likelihood at fixed phi.
inline ProfiledObjective ml_profile(const Dataset& ds, const RoughnessParams& phi,
                                    const Eigen::MatrixXd& F) {
  const int n = ds.n();
  const auto llt =
      cholesky_or_throw(corr_matrix(ds.X, ds.X, phi), dataset_jitter(n), "ml_profile");
  const Eigen::MatrixXd V = llt.matrixL().solve(F);
  const Eigen::VectorXd u = llt.matrixL().solve(ds.y);
  const Eigen::MatrixXd G = V.transpose() * V;
  Eigen::LLT<Eigen::MatrixXd> gllt(G);
  if (gllt.info() != Eigen::Success) {
    throw IdentifiabilityError("ml_profile: F' R^-1 F is singular");
  }
  ProfiledObjective out;
  out.beta_hat = gllt.solve(V.transpose() * u);
  const double s2 = (u - V * out.beta_hat).squaredNorm() / n;
  out.sigma2_hat = std::max(s2, kSigma2Floor);
  out.objective = n * std::log(out.sigma2_hat) + logdet_from_llt(llt);
  return out;
}

}  // namespace detail

/// Maximum likelihood fit: exact profile formulas for (beta, sigma^2) and
/// simplex descent over log phi with multi-starts. Guarded by a dense cap.
inline FittedModel fit_mle(const Dataset& ds, const BasisSpec& basis, const FitOptions& opts = {}) {
  ds.validate();
  if (ds.n() > opts.dense_cap) {
    throw std::invalid_argument("fit_mle: n = " + std::to_string(ds.n()) +
                                " exceeds the dense cap " + std::to_string(opts.dense_cap));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXd F = basis_matrix(ds.X, basis);
  const int p = ds.p();
  auto objective = [&](const Eigen::VectorXd& logphi) -> double {
    try {
      return detail::ml_profile(ds, RoughnessParams(logphi.array().exp().matrix().eval()), F).objective;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const MultistartResult ms = multistart_minimize(objective, p, opts.seed, opts.multistart, opts.trace);
  if (ms.all_failed) throw NumericalError("fit_mle: every start failed to evaluate");

  FittedModel fit;
  fit.method = "ML";
  fit.basis = basis;
  fit.params.phi = RoughnessParams(ms.best.x.array().exp().matrix().eval());
  const auto prof = detail::ml_profile(ds, fit.params.phi, F);
  fit.params.beta = prof.beta_hat;
  fit.params.sigma2 = prof.sigma2_hat;
  fit.objective = ms.best.fval;
  fit.converged = ms.best.converged;
  fit.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return fit;
}

/// Dense predictor carrying the factorization of the full correlation matrix.
class BlupModel {
 public:
  BlupModel(const Dataset& ds, const GpParams& params, const BasisSpec& basis)
      : X_(ds.X), params_(params), basis_(basis) {
    params_.validate();
    llt_ = detail::cholesky_or_throw(corr_matrix(ds.X, ds.X, params.phi), dataset_jitter(ds.n()),
                                     "blup");
    const Eigen::MatrixXd F = basis_matrix(ds.X, basis);
    resid_solved_ = llt_.solve(ds.y - F * params.beta);
  }

  PredictionResult predict(const Eigen::VectorXd& xstar) const {
    PredictionResult out;
    const Eigen::VectorXd a = corr_matrix(xstar.transpose(), X_, params_.phi).transpose();
    const double fx_beta = basis_.row(xstar).dot(params_.beta);
    out.mean = fx_beta + a.dot(resid_solved_);
    const Eigen::VectorXd b = llt_.solve(a);
    out.variance_pre_clamp = params_.sigma2 * (1.0 - a.dot(b));
    out.variance = std::max(out.variance_pre_clamp, 0.0);
    return out;
  }

 private:
  Eigen::MatrixXd X_;
  GpParams params_;
  BasisSpec basis_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd resid_solved_;
};

/// BLUP at one point from a fitted model (requires the dense ML route).
inline PredictionResult blup(const Dataset& ds, const FittedModel& fit, const Eigen::VectorXd& xstar) {
  if (fit.method != "ML") {
    throw std::invalid_argument("blup: fitted model must come from the ML route (got " +
                                fit.method + ")");
  }
  return BlupModel(ds, fit.params, fit.basis).predict(xstar);
}

/// Draw one realization y = F beta + sigma L u with LL' = R + delta I and u a
/// counter-indexed standard normal stream (deterministic given the seed).
inline Eigen::VectorXd sample_gp(const Eigen::MatrixXd& X, const GpParams& params,
                                 const BasisSpec& basis, std::uint64_t seed) {
  params.validate();
  const int n = static_cast<int>(X.rows());
  const auto llt =
      detail::cholesky_or_throw(corr_matrix(X, X, params.phi), dataset_jitter(n), "sample_gp");
  Rng rng = Rng::keyed(seed, 0x6A);
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u(i) = rng.normal();
  const Eigen::MatrixXd F = basis_matrix(X, basis);
  const Eigen::VectorXd lu = llt.matrixL() * u;
  return F * params.beta + std::sqrt(params.sigma2) * lu;
}

}  // namespace blockgp

#endif  // BLOCKGP_GP_FULL_HPP
