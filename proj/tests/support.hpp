// Shared generators for the test suites: point sets with a guaranteed minimum
// separation (squared-exponential Gram matrices of near-duplicate points are
// numerically singular and would drown the identities being checked in
// regularization noise).
#ifndef BLOCKGP_TESTS_SUPPORT_HPP
#define BLOCKGP_TESTS_SUPPORT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "blockgp/data.hpp"
#include "blockgp/gp_full.hpp"
#include "blockgp/rng.hpp"

namespace blockgp::testsupport {

/// n points in p dimensions on a jittered cell grid: distinct cells, points
/// inside the middle 60% of their cell, so any two points are at least 0.4
/// cell widths apart. Covers roughly [0, extent]^p.
inline Eigen::MatrixXd spaced_points(Rng& rng, int n, int p, double cell = 0.5) {
  int side = 1;
  while (std::pow(side, p) < 2 * n) ++side;
  std::vector<int> cells(static_cast<std::size_t>(std::pow(side, p)));
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
  rng.shuffle(cells);
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i) {
    int c = cells[i];
    for (int d = 0; d < p; ++d) {
      X(i, d) = (c % side + 0.2 + 0.6 * rng.uniform()) * cell;
      c /= side;
    }
  }
  return X;
}

struct BlockedModel {
  Dataset ds;
  Partition part;
  GpParams params;
};

inline GpParams unit_params(double phi, double beta = 0.0, double sigma2 = 1.0) {
  GpParams p;
  p.beta = Eigen::VectorXd::Constant(1, beta);
  p.sigma2 = sigma2;
  p.phi = RoughnessParams(phi);
  return p;
}

/// Well-separated 1-D dataset with spatially contiguous blocks of random
/// sizes; responses drawn from the model.
inline BlockedModel contiguous_model(Rng& rng, int n, int k, double phi = 2.0,
                                     double spacing = 1.0) {
  BlockedModel m;
  m.params = unit_params(phi);
  m.ds.X.resize(n, 1);
  for (int i = 0; i < n; ++i) m.ds.X(i, 0) = (i + rng.uniform(0.25, 0.75)) * spacing;
  m.ds.y = sample_gp(m.ds.X, m.params, BasisSpec::constant(), rng.next_u64());
  std::vector<int> cuts;  // k-1 distinct interior cut points
  while (static_cast<int>(cuts.size()) < k - 1) {
    const int c = 1 + rng.uniform_int(n - 1);
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  cuts.push_back(0);
  cuts.push_back(n);
  std::sort(cuts.begin(), cuts.end());
  m.part.blocks.resize(k);
  for (int b = 0; b < k; ++b) {
    for (int i = cuts[b]; i < cuts[b + 1]; ++i) m.part.blocks[b].push_back(i);
  }
  return m;
}

/// Same dataset family with blocks dealt round-robin (interleaved in space).
inline BlockedModel interleaved_model(Rng& rng, int n, int k, double phi = 2.0,
                                      double spacing = 1.0) {
  BlockedModel m;
  m.params = unit_params(phi);
  m.ds.X.resize(n, 1);
  for (int i = 0; i < n; ++i) m.ds.X(i, 0) = (i + rng.uniform(0.25, 0.75)) * spacing;
  m.ds.y = sample_gp(m.ds.X, m.params, BasisSpec::constant(), rng.next_u64());
  const auto idx = rng.permutation(n);
  m.part.blocks.resize(k);
  for (int i = 0; i < n; ++i) m.part.blocks[i % k].push_back(idx[i]);
  for (auto& b : m.part.blocks) std::sort(b.begin(), b.end());
  return m;
}

}  // namespace blockgp::testsupport

#endif  // BLOCKGP_TESTS_SUPPORT_HPP
