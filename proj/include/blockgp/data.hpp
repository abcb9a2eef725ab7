#ifndef BLOCKGP_DATA_HPP
#define BLOCKGP_DATA_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blockgp/kernel.hpp"

namespace blockgp {

/// Inputs, responses and (optionally) the slice labels the design was built
/// with. Rows of X must be distinct; the correlation matrix of a design with
/// duplicate rows is singular.
struct Dataset {
  Eigen::MatrixXd X;        // n x p
  Eigen::VectorXd y;        // n
  std::vector<int> slice;   // empty, or one label in {1..k} per row

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
  bool has_slices() const { return !slice.empty(); }

  void validate() const {
    if (X.rows() != y.size()) throw std::invalid_argument("Dataset: X rows != y size");
    if (X.rows() == 0) throw std::invalid_argument("Dataset: empty");
    if (!slice.empty() && static_cast<int>(slice.size()) != n()) {
      throw std::invalid_argument("Dataset: slice labels do not match row count");
    }
    // exact-duplicate row check via lexicographic sort
    std::vector<int> idx(n());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      for (int d = 0; d < p(); ++d) {
        if (X(a, d) != X(b, d)) return X(a, d) < X(b, d);
      }
      return false;
    });
    for (int i = 1; i < n(); ++i) {
      if (X.row(idx[i - 1]) == X.row(idx[i])) {
        throw std::invalid_argument("Dataset: duplicate input rows " + std::to_string(idx[i - 1]) +
                                    " and " + std::to_string(idx[i]));
      }
    }
  }
};

/// Trend coefficients, process variance and roughness.
struct GpParams {
  Eigen::VectorXd beta;
  double sigma2 = 1.0;
  RoughnessParams phi;

  void validate() const {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("GpParams: sigma2 must be positive");
    phi.validate();
  }
};

/// Ordered disjoint cover of {0..n-1}. Order matters: blocks 1 and 2 enter the
/// composite likelihood as exact chain-rule terms.
struct Partition {
  std::vector<std::vector<int>> blocks;

  int k() const { return static_cast<int>(blocks.size()); }
  int size(int i) const { return static_cast<int>(blocks[i].size()); }

  int total() const {
    int t = 0;
    for (const auto& b : blocks) t += static_cast<int>(b.size());
    return t;
  }

  void validate(int n) const {
    if (blocks.empty()) throw std::invalid_argument("Partition: no blocks");
    std::vector<char> seen(n, 0);
    for (const auto& b : blocks) {
      if (b.empty()) throw std::invalid_argument("Partition: empty block");
      for (int i : b) {
        if (i < 0 || i >= n) throw std::invalid_argument("Partition: index out of range");
        if (seen[i]) throw std::invalid_argument("Partition: index " + std::to_string(i) + " repeated");
        seen[i] = 1;
      }
    }
    if (total() != n) throw std::invalid_argument("Partition: blocks do not cover the dataset");
  }

  /// Reorder blocks; `order` is a permutation of {0..k-1}.
  Partition reordered(const std::vector<int>& order) const {
    if (static_cast<int>(order.size()) != k()) {
      throw std::invalid_argument("Partition: block order has wrong length");
    }
    Partition out;
    std::vector<char> used(k(), 0);
    for (int o : order) {
      if (o < 0 || o >= k() || used[o]) throw std::invalid_argument("Partition: invalid block order");
      used[o] = 1;
      out.blocks.push_back(blocks[o]);
    }
    return out;
  }
};

/// Result of a fit, independent of the method that produced it.
struct FittedModel {
  std::string method;   // ML | CI | CML | CCL
  GpParams params;
  BasisSpec basis;
  std::optional<Partition> partition;  // absent for ML
  double objective = 0.0;              // concentrated objective at the optimum
  double wall_time_s = 0.0;
  bool converged = true;
};

/// Point prediction with variance; weights/per-block means present for the
/// block predictors only.
struct PredictionResult {
  double mean = 0.0;
  double variance = 0.0;            // clamped at 0
  double variance_pre_clamp = 0.0;  // value before clamping
  std::optional<Eigen::VectorXd> weights;
  std::optional<Eigen::VectorXd> block_cond_means;
  bool exact_hit = false;   // x* coincided with a design point
  bool fallback = false;    // CL predictor fell back to a single block
};

}  // namespace blockgp

#endif  // BLOCKGP_DATA_HPP
