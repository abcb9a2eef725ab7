#ifndef BLOCKGP_KERNEL_HPP
#define BLOCKGP_KERNEL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blockgp/common.hpp"

namespace blockgp {

/// Per-dimension inverse squared length-scales of the squared-exponential
/// correlation exp{-(x-x')^T diag(phi) (x-x')}.
struct RoughnessParams {
  Eigen::VectorXd phi;

  RoughnessParams() = default;
  explicit RoughnessParams(Eigen::VectorXd p) : phi(std::move(p)) { validate(); }
  explicit RoughnessParams(double p) : phi(Eigen::VectorXd::Constant(1, p)) { validate(); }

  int dim() const { return static_cast<int>(phi.size()); }

  void validate() const {
    if (phi.size() == 0) throw std::invalid_argument("RoughnessParams: phi is empty");
    for (int d = 0; d < phi.size(); ++d) {
      if (!(phi[d] > 0.0) || !std::isfinite(phi[d])) {
        throw std::invalid_argument("RoughnessParams: phi[" + std::to_string(d) +
                                    "] must be positive and finite");
      }
    }
  }
};

inline double sq_exp_corr(const Eigen::VectorXd& x, const Eigen::VectorXd& x2,
                          const RoughnessParams& phi) {
  if (x.size() != x2.size() || x.size() != phi.phi.size()) {
    throw std::invalid_argument("sq_exp_corr: dimension mismatch");
  }
  const Eigen::VectorXd d = x - x2;
  return std::exp(-d.cwiseProduct(d).dot(phi.phi));
}

/// Correlation matrix between two point sets (rows are points). When X2 == X
/// the result is exactly symmetric with a unit diagonal: each unordered pair
/// is computed once.
inline Eigen::MatrixXd corr_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X2,
                                   const RoughnessParams& phi) {
  if (X.cols() != X2.cols() || X.cols() != phi.phi.size()) {
    throw std::invalid_argument("corr_matrix: dimension mismatch");
  }
  const bool same = (&X == &X2) || (X.rows() == X2.rows() && X.data() == X2.data());
  Eigen::MatrixXd K(X.rows(), X2.rows());
  if (same) {
    for (int i = 0; i < X.rows(); ++i) {
      K(i, i) = 1.0;
      for (int j = i + 1; j < X.rows(); ++j) {
        const Eigen::VectorXd d = X.row(i) - X.row(j);
        const double v = std::exp(-d.cwiseProduct(d).dot(phi.phi));
        K(i, j) = v;
        K(j, i) = v;
      }
    }
  } else {
    for (int i = 0; i < X.rows(); ++i) {
      for (int j = 0; j < X2.rows(); ++j) {
        const Eigen::VectorXd d = X.row(i) - X2.row(j);
        K(i, j) = std::exp(-d.cwiseProduct(d).dot(phi.phi));
      }
    }
  }
  return K;
}

/// Trend basis f(x). Constant (q=1) is the default everywhere.
struct BasisSpec {
  enum class Kind { Constant, Linear, Custom };

  Kind kind = Kind::Constant;
  std::vector<std::function<double(const Eigen::VectorXd&)>> custom;

  static BasisSpec constant() { return BasisSpec{}; }
  static BasisSpec linear() { return BasisSpec{Kind::Linear, {}}; }
  static BasisSpec custom_list(std::vector<std::function<double(const Eigen::VectorXd&)>> fns) {
    if (fns.empty()) throw std::invalid_argument("BasisSpec: custom list is empty");
    return BasisSpec{Kind::Custom, std::move(fns)};
  }

  int q(int p) const {
    switch (kind) {
      case Kind::Constant: return 1;
      case Kind::Linear: return p + 1;
      case Kind::Custom: return static_cast<int>(custom.size());
    }
    return 1;
  }

  Eigen::RowVectorXd row(const Eigen::VectorXd& x) const {
    Eigen::RowVectorXd r(q(static_cast<int>(x.size())));
    switch (kind) {
      case Kind::Constant:
        r(0) = 1.0;
        break;
      case Kind::Linear:
        r(0) = 1.0;
        r.tail(x.size()) = x.transpose();
        break;
      case Kind::Custom:
        for (std::size_t i = 0; i < custom.size(); ++i) r(static_cast<int>(i)) = custom[i](x);
        break;
    }
    return r;
  }

  std::string name() const {
    switch (kind) {
      case Kind::Constant: return "constant";
      case Kind::Linear: return "linear";
      case Kind::Custom: return "custom";
    }
    return "constant";
  }
};

/// F = f(X)^T, one row per point.
inline Eigen::MatrixXd basis_matrix(const Eigen::MatrixXd& X, const BasisSpec& spec) {
  Eigen::MatrixXd F(X.rows(), spec.q(static_cast<int>(X.cols())));
  for (int i = 0; i < X.rows(); ++i) F.row(i) = spec.row(X.row(i).transpose());
  return F;
}

}  // namespace blockgp

#endif  // BLOCKGP_KERNEL_HPP
