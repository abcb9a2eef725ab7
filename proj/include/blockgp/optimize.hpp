#ifndef BLOCKGP_OPTIMIZE_HPP
#define BLOCKGP_OPTIMIZE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "blockgp/rng.hpp"

namespace blockgp {

struct SimplexOptions {
  double diameter_tol = 1e-6;  // converged when max vertex distance drops below
  int max_iter = 400;
  double init_step = 0.5;
  // optional box constraint: points are evaluated at their clamped image with
  // a quadratic pull-back, so a flat objective cannot drag the argmin off to
  // arbitrary coordinates
  bool constrained = false;
  double box_lo = 0.0;
  double box_hi = 0.0;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double fval = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Iteration callback: (iteration, best point, best value).
using TraceFn = std::function<void(int, const Eigen::VectorXd&, double)>;

/// Nelder-Mead simplex descent with the standard coefficients
/// (reflect 1, expand 2, contract 1/2, shrink 1/2).
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, const SimplexOptions& opts = {},
                                 const TraceFn& trace = {}) {
  const int n = static_cast<int>(x0.size());
  const double inf = std::numeric_limits<double>::infinity();
  SimplexResult res;

  std::vector<Eigen::VectorXd> v(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 1; i <= n; ++i) v[i](i - 1) += opts.init_step;
  auto clamp = [&](const Eigen::VectorXd& x) {
    return x.cwiseMax(opts.box_lo).cwiseMin(opts.box_hi).eval();
  };
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    double y;
    if (opts.constrained) {
      const Eigen::VectorXd xc = clamp(x);
      y = f(xc) + (x - xc).squaredNorm();
    } else {
      y = f(x);
    }
    return std::isfinite(y) ? y : inf;
  };
  for (int i = 0; i <= n; ++i) fv[i] = eval(v[i]);

  auto order = [&] {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    std::vector<Eigen::VectorXd> v2(n + 1);
    std::vector<double> f2(n + 1);
    for (int i = 0; i <= n; ++i) {
      v2[i] = v[idx[i]];
      f2[i] = fv[idx[i]];
    }
    v.swap(v2);
    fv.swap(f2);
  };
  order();

  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    double diam = 0.0;
    for (int i = 1; i <= n; ++i) diam = std::max(diam, (v[i] - v[0]).lpNorm<Eigen::Infinity>());
    if (trace) trace(res.iterations, v[0], fv[0]);
    if (diam < opts.diameter_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += v[i];
    centroid /= n;

    const Eigen::VectorXd xr = centroid + (centroid - v[n]);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - v[n]);
      const double fe = eval(xe);
      if (fe < fr) {
        v[n] = xe;
        fv[n] = fe;
      } else {
        v[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      v[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      Eigen::VectorXd xc;
      if (outside) {
        xc = centroid + 0.5 * (xr - centroid);
      } else {
        xc = centroid - 0.5 * (centroid - v[n]);
      }
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[n])) {
        v[n] = xc;
        fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          v[i] = v[0] + 0.5 * (v[i] - v[0]);
          fv[i] = eval(v[i]);
        }
      }
    }
    order();
  }
  res.x = opts.constrained ? clamp(v[0]) : v[0];
  res.fval = fv[0];
  return res;
}

struct MultistartOptions {
  int starts = 5;
  double box_lo = -3.0;  // starts drawn uniformly from [box_lo, box_hi]^p;
  double box_hi = 3.0;   // the same box constrains the simplex
  SimplexOptions simplex;
};

struct MultistartResult {
  SimplexResult best;
  int best_start = -1;
  bool all_failed = true;
};

/// Runs the simplex from `starts` random points; ties broken by start index so
/// the outcome is independent of evaluation order.
inline MultistartResult multistart_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                            int dim, std::uint64_t seed,
                                            const MultistartOptions& opts = {},
                                            const TraceFn& trace = {}) {
  Rng rng = Rng::keyed(seed, 0x0971);
  MultistartResult out;
  SimplexOptions sopts = opts.simplex;
  sopts.constrained = true;
  sopts.box_lo = opts.box_lo;
  sopts.box_hi = opts.box_hi;
  for (int s = 0; s < opts.starts; ++s) {
    Eigen::VectorXd x0(dim);
    for (int d = 0; d < dim; ++d) x0(d) = rng.uniform(opts.box_lo, opts.box_hi);
    const SimplexResult r = nelder_mead(f, x0, sopts, trace);
    if (std::isfinite(r.fval) && (out.all_failed || r.fval < out.best.fval)) {
      out.best = r;
      out.best_start = s;
      out.all_failed = false;
    }
  }
  return out;
}

}  // namespace blockgp

#endif  // BLOCKGP_OPTIMIZE_HPP
