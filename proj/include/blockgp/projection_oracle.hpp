#ifndef BLOCKGP_PROJECTION_ORACLE_HPP
#define BLOCKGP_PROJECTION_ORACLE_HPP

#include <Eigen/Dense>
#include <stdexcept>

#include "blockgp/common.hpp"
#include "blockgp/gp_full.hpp"
#include "blockgp/kernel.hpp"

namespace blockgp {

/// Validation oracle for the conditional moments, built the other way around:
/// factor the joint correlation matrix of (x, X_i, X_j) as A'A, represent each
/// conditional variable through the projection I - A_i (A_i'A_i)^{-1} A_i',
/// and read the cross-covariance off the product of projections. Used by the
/// test suite and a hidden CLI verb; not a production path.
struct ProjectionOracleResult {
  double mean_i = 0.0;
  double mean_j = 0.0;
  double var_i = 0.0;     // unit-variance scale
  double var_j = 0.0;
  double cross_cov = 0.0;
};

inline ProjectionOracleResult projection_oracle(const Eigen::VectorXd& x,
                                                const Eigen::MatrixXd& Xi,
                                                const Eigen::VectorXd& yi,
                                                const Eigen::MatrixXd& Xj,
                                                const Eigen::VectorXd& yj,
                                                const RoughnessParams& phi,
                                                const BasisSpec& basis,
                                                const Eigen::VectorXd& beta) {
  const int ni = static_cast<int>(Xi.rows());
  const int nj = static_cast<int>(Xj.rows());
  const int nn = 1 + ni + nj;
  Eigen::MatrixXd joint(nn, Xi.cols());
  joint.row(0) = x.transpose();
  joint.middleRows(1, ni) = Xi;
  joint.middleRows(1 + ni, nj) = Xj;

  const Eigen::MatrixXd M = corr_matrix(joint, joint, phi);
  const auto llt = detail::cholesky_or_throw(M, matrix_jitter(nn), "projection_oracle");
  // A'A = M with A the upper-triangular transpose of the Cholesky factor
  const Eigen::MatrixXd A = Eigen::MatrixXd(llt.matrixL()).transpose();

  const Eigen::VectorXd a = A.col(0);
  const Eigen::MatrixXd Ai = A.middleCols(1, ni);
  const Eigen::MatrixXd Aj = A.middleCols(1 + ni, nj);

  auto project_out = [](const Eigen::MatrixXd& B, const Eigen::VectorXd& v) {
    // (I - B (B'B)^{-1} B') v
    const Eigen::MatrixXd G = B.transpose() * B;
    return (v - B * G.ldlt().solve(B.transpose() * v)).eval();
  };

  const Eigen::VectorXd pi_a = project_out(Ai, a);
  const Eigen::VectorXd pj_a = project_out(Aj, a);

  ProjectionOracleResult out;
  out.var_i = a.dot(pi_a);
  out.var_j = a.dot(pj_a);
  out.cross_cov = pi_a.dot(pj_a);

  const double fx_beta = basis.row(x).dot(beta);
  const Eigen::MatrixXd Fi = basis_matrix(Xi, basis);
  const Eigen::MatrixXd Fj = basis_matrix(Xj, basis);
  const Eigen::MatrixXd Gi = Ai.transpose() * Ai;
  const Eigen::MatrixXd Gj = Aj.transpose() * Aj;
  out.mean_i = fx_beta + a.dot(Ai * Gi.ldlt().solve(yi - Fi * beta));
  out.mean_j = fx_beta + a.dot(Aj * Gj.ldlt().solve(yj - Fj * beta));
  return out;
}

}  // namespace blockgp

#endif  // BLOCKGP_PROJECTION_ORACLE_HPP
