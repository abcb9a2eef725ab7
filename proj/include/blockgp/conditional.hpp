#ifndef BLOCKGP_CONDITIONAL_HPP
#define BLOCKGP_CONDITIONAL_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "blockgp/common.hpp"
#include "blockgp/data.hpp"
#include "blockgp/gp_full.hpp"
#include "blockgp/kernel.hpp"
#include "blockgp/parallel.hpp"

namespace blockgp {

struct CacheOptions {
  bool cross_blocks = true;  // precompute K(X_i, X_j) for every pair
  int threads = 1;
};

/// Immutable per-block factorizations and solved systems for one phi. All
/// query operations are read-only. Factorizations use the dataset-level
/// jitter, so the blocks decompose the same regularized correlation matrix
/// the dense path factorizes.
class BlockCache {
 public:
  struct Block {
    Eigen::MatrixXd X;   // n_i x p
    Eigen::VectorXd y;
    Eigen::MatrixXd F;   // n_i x q
    Eigen::MatrixXd K;   // K(X_i, X_i), unjittered
    Eigen::LLT<Eigen::MatrixXd> llt;  // of K + delta I
    Eigen::VectorXd Kinv_y;
    Eigen::MatrixXd Kinv_F;
    double logdet = 0.0;
  };

  BlockCache(const Dataset& ds, const Partition& partition, const RoughnessParams& phi,
             const BasisSpec& basis, const CacheOptions& opts = {})
      : phi_(phi), basis_(basis), n_(ds.n()), delta_(dataset_jitter(ds.n())) {
    partition.validate(ds.n());
    phi_.validate();
    const int k = partition.k();
    blocks_.resize(k);
    parallel_for(k, opts.threads, [&](int i) {
      Block& b = blocks_[i];
      const auto& idx = partition.blocks[i];
      b.X.resize(idx.size(), ds.p());
      b.y.resize(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        b.X.row(r) = ds.X.row(idx[r]);
        b.y(r) = ds.y(idx[r]);
      }
      b.F = basis_matrix(b.X, basis);
      b.K = corr_matrix(b.X, b.X, phi_);
      try {
        b.llt = detail::cholesky_or_throw(b.K, delta_, "build_cache");
      } catch (const NumericalError& e) {
        throw NumericalError("block " + std::to_string(i + 1) + ": " + e.what());
      }
      b.logdet = detail::logdet_from_llt(b.llt);
      b.Kinv_y = b.llt.solve(b.y);
      b.Kinv_F = b.llt.solve(b.F);
    });
    if (opts.cross_blocks && k > 1) {
      std::vector<std::pair<int, int>> pairs;
      for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
      }
      std::vector<Eigen::MatrixXd> mats(pairs.size());
      parallel_for(static_cast<int>(pairs.size()), opts.threads, [&](int t) {
        mats[t] = corr_matrix(blocks_[pairs[t].first].X, blocks_[pairs[t].second].X, phi_);
      });
      for (std::size_t t = 0; t < pairs.size(); ++t) cross_[pairs[t]] = std::move(mats[t]);
      has_cross_ = true;
    }
  }

  int k() const { return static_cast<int>(blocks_.size()); }
  int n() const { return n_; }
  int p() const { return static_cast<int>(blocks_[0].X.cols()); }
  int q() const { return static_cast<int>(blocks_[0].F.cols()); }
  double delta() const { return delta_; }
  const RoughnessParams& phi() const { return phi_; }
  const BasisSpec& basis() const { return basis_; }
  const Block& block(int i) const { return blocks_.at(i); }
  bool has_cross() const { return has_cross_; }

  /// K(X_i, X_j); served from the precomputed pair store when present.
  Eigen::MatrixXd cross(int i, int j) const {
    if (i == j) return blocks_[i].K;
    const auto key = std::make_pair(std::min(i, j), std::max(i, j));
    if (has_cross_) {
      const Eigen::MatrixXd& m = cross_.at(key);
      return i < j ? m : Eigen::MatrixXd(m.transpose());
    }
    return corr_matrix(blocks_[i].X, blocks_[j].X, phi_);
  }

  /// Stored pair matrix for i < j (requires cross_blocks).
  const Eigen::MatrixXd& cross_upper(int i, int j) const { return cross_.at({i, j}); }

  /// K(X_i, X_j) * V without materializing a transposed copy.
  Eigen::MatrixXd cross_times(int i, int j, const Eigen::MatrixXd& V) const {
    if (i == j) return blocks_[i].K * V;
    if (has_cross_) {
      if (i < j) return cross_.at({i, j}) * V;
      return cross_.at({j, i}).transpose() * V;
    }
    return corr_matrix(blocks_[i].X, blocks_[j].X, phi_) * V;
  }

  Eigen::VectorXd cross_times(int i, int j, const Eigen::VectorXd& v) const {
    if (i == j) return blocks_[i].K * v;
    if (has_cross_) {
      if (i < j) return cross_.at({i, j}) * v;
      return cross_.at({j, i}).transpose() * v;
    }
    return corr_matrix(blocks_[i].X, blocks_[j].X, phi_) * v;
  }

 private:
  RoughnessParams phi_;
  BasisSpec basis_;
  int n_;
  double delta_;
  std::vector<Block> blocks_;
  std::map<std::pair<int, int>, Eigen::MatrixXd> cross_;
  bool has_cross_ = false;
};

inline BlockCache build_cache(const Dataset& ds, const Partition& partition,
                              const RoughnessParams& phi, const BasisSpec& basis,
                              const CacheOptions& opts = {}) {
  return BlockCache(ds, partition, phi, basis, opts);
}

/// E[y(x) | y(X_i)] = f(x)' beta + K(x, X_i) K_i^{-1} (y_i - F_i beta).
inline double cond_mean(const BlockCache& cache, int i, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& beta) {
  const auto& b = cache.block(i);
  const Eigen::VectorXd a = corr_matrix(x.transpose(), b.X, cache.phi()).transpose();
  const Eigen::RowVectorXd gb = a.transpose() * b.Kinv_F;
  return cache.basis().row(x).dot(beta) + a.dot(b.Kinv_y) - gb.dot(beta);
}

/// Cov(eps_i, eps_j) at unit process variance:
/// 1 + a_i K_i^{-1} K(X_i,X_j) K_j^{-1} a_j' - a_i K_i^{-1} a_i' - a_j K_j^{-1} a_j',
/// which reduces to 1 - a_i K_i^{-1} a_i' when i == j.
inline double cond_cross_cov(const BlockCache& cache, int i, int j, const Eigen::VectorXd& x) {
  const auto& bi = cache.block(i);
  const Eigen::VectorXd ai = corr_matrix(x.transpose(), bi.X, cache.phi()).transpose();
  const Eigen::VectorXd si = bi.llt.solve(ai);
  if (i == j) return 1.0 - ai.dot(si);
  const auto& bj = cache.block(j);
  const Eigen::VectorXd aj = corr_matrix(x.transpose(), bj.X, cache.phi()).transpose();
  const Eigen::VectorXd sj = bj.llt.solve(aj);
  return 1.0 + si.dot(cache.cross_times(i, j, sj)) - ai.dot(si) - aj.dot(sj);
}

/// Conditional moments of {eps_i : i in S} at a target x, at unit process
/// variance. Mean seeds are kept split into data and basis parts so any beta
/// can be applied downstream.
struct CondMoments {
  std::vector<int> blocks;      // the ordered subset S
  Eigen::RowVectorXd fx;        // f(x)'
  Eigen::VectorXd mean_data;    // a_i' K_i^{-1} y_i
  Eigen::MatrixXd mean_basis;   // rows a_i' K_i^{-1} F_i
  Eigen::VectorXd lambda;       // a_i' K_i^{-1} a_i
  Eigen::MatrixXd K;            // |S| x |S|, K(i,i) = 1 - lambda_i

  double mean(int s, const Eigen::VectorXd& beta) const {
    return fx.dot(beta) + mean_data(s) - mean_basis.row(s).dot(beta);
  }
};

inline CondMoments cond_cov_matrix(const BlockCache& cache, const std::vector<int>& S,
                                   const Eigen::VectorXd& x) {
  if (S.empty()) throw std::invalid_argument("cond_cov_matrix: empty block subset");
  const int m = static_cast<int>(S.size());
  CondMoments cm;
  cm.blocks = S;
  cm.fx = cache.basis().row(x);
  cm.mean_data.resize(m);
  cm.mean_basis.resize(m, cache.q());
  cm.lambda.resize(m);
  cm.K.resize(m, m);
  std::vector<Eigen::VectorXd> a(m), s(m);
  for (int t = 0; t < m; ++t) {
    const auto& b = cache.block(S[t]);
    a[t] = corr_matrix(x.transpose(), b.X, cache.phi()).transpose();
    s[t] = b.llt.solve(a[t]);
    cm.lambda(t) = a[t].dot(s[t]);
    cm.mean_data(t) = a[t].dot(b.Kinv_y);
    cm.mean_basis.row(t) = a[t].transpose() * b.Kinv_F;
    cm.K(t, t) = 1.0 - cm.lambda(t);
  }
  for (int t = 0; t < m; ++t) {
    for (int u = t + 1; u < m; ++u) {
      const double v =
          1.0 + s[t].dot(cache.cross_times(S[t], S[u], s[u])) - cm.lambda(t) - cm.lambda(u);
      cm.K(t, u) = v;
      cm.K(u, t) = v;
    }
  }
  return cm;
}

struct OptimalWeights {
  Eigen::VectorXd w;   // sums to 1
  double varmin = 0.0; // 1 / (1' K^{-1} 1)
};

/// Minimum-variance weights for a unit-sum combination: w = K^{-1} 1 / (1' K^{-1} 1).
inline OptimalWeights optimal_weights(const Eigen::MatrixXd& K) {
  if (K.rows() != K.cols()) throw std::invalid_argument("optimal_weights: K must be square");
  const int m = static_cast<int>(K.rows());
  const auto llt = detail::cholesky_or_throw(K, matrix_jitter(m), "optimal_weights");
  const Eigen::VectorXd u = llt.solve(Eigen::VectorXd::Ones(m));
  const double s = u.sum();
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw NumericalError("optimal_weights: 1' K^{-1} 1 = " + std::to_string(s) +
                         " is not positive");
  }
  OptimalWeights out;
  out.w = u / s;
  out.w /= out.w.sum();  // unit sum exactly, by renormalization
  out.varmin = 1.0 / s;
  return out;
}

}  // namespace blockgp

#endif  // BLOCKGP_CONDITIONAL_HPP
