#ifndef BLOCKGP_DESIGN_HPP
#define BLOCKGP_DESIGN_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "blockgp/data.hpp"
#include "blockgp/rng.hpp"

namespace blockgp {

/// k*m points in [0,1)^p with slice labels in {1..k}. Each slice is an m-point
/// Latin hypercube; the union is a (k*m)-point Latin hypercube.
struct SlicedDesign {
  Eigen::MatrixXd points;     // (k*m) x p, slice-major row order
  std::vector<int> slice_of;  // 1-based slice label per row
  int k = 0;
  int m = 0;
};

/// Two-stage permutation construction: per dimension the k*m fine bins are
/// grouped into m coarse bins of k; within each coarse bin a random
/// permutation hands one fine bin to every slice, giving each slice one point
/// per coarse bin and the union one point per fine bin. A second per-slice
/// permutation decouples the coordinates, and points are jittered uniformly
/// inside their fine bin.
inline SlicedDesign generate_slhd(int k, int m, int p, std::uint64_t seed) {
  if (k < 1 || m < 1 || p < 1) throw std::invalid_argument("generate_slhd: k, m, p must be >= 1");
  const int N = k * m;
  SlicedDesign d;
  d.k = k;
  d.m = m;
  d.points.resize(N, p);
  d.slice_of.resize(N);
  Rng rng = Rng::keyed(seed, 0x5148D);  // design stream
  for (int t = 0; t < k; ++t) {
    for (int i = 0; i < m; ++i) d.slice_of[t * m + i] = t + 1;
  }
  for (int dim = 0; dim < p; ++dim) {
    // fine bin of slice t in coarse bin j
    std::vector<int> fine(static_cast<std::size_t>(k) * m);
    for (int j = 0; j < m; ++j) {
      const std::vector<int> perm = rng.permutation(k);
      for (int t = 0; t < k; ++t) fine[static_cast<std::size_t>(t) * m + j] = j * k + perm[t];
    }
    for (int t = 0; t < k; ++t) {
      const std::vector<int> order = rng.permutation(m);
      for (int i = 0; i < m; ++i) {
        const int bin = fine[static_cast<std::size_t>(t) * m + order[i]];
        d.points(t * m + i, dim) = (bin + rng.uniform()) / N;
      }
    }
  }
  return d;
}

struct SlhdValidation {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Exact check of both Latin properties with half-open bins [b/B, (b+1)/B).
inline SlhdValidation validate_slhd(const SlicedDesign& d) {
  SlhdValidation v;
  const int N = static_cast<int>(d.points.rows());
  const int p = static_cast<int>(d.points.cols());
  if (d.k < 1 || d.m < 1 || N != d.k * d.m || static_cast<int>(d.slice_of.size()) != N) {
    v.ok = false;
    v.violations.push_back("inconsistent sizes");
    return v;
  }
  auto bin_of = [](double x, int bins) { return static_cast<int>(std::floor(x * bins)); };
  for (int dim = 0; dim < p; ++dim) {
    std::vector<int> union_count(N, 0);
    std::vector<std::vector<int>> slice_count(d.k, std::vector<int>(d.m, 0));
    for (int r = 0; r < N; ++r) {
      const double x = d.points(r, dim);
      if (!(x >= 0.0 && x < 1.0)) {
        v.ok = false;
        v.violations.push_back("dim " + std::to_string(dim) + ": point " + std::to_string(r) +
                               " outside [0,1)");
        continue;
      }
      ++union_count[bin_of(x, N)];
      ++slice_count[d.slice_of[r] - 1][bin_of(x, d.m)];
    }
    for (int b = 0; b < N; ++b) {
      if (union_count[b] != 1) {
        v.ok = false;
        v.violations.push_back("dim " + std::to_string(dim) + ": union bin " + std::to_string(b) +
                               " holds " + std::to_string(union_count[b]) + " points");
      }
    }
    for (int t = 0; t < d.k; ++t) {
      for (int b = 0; b < d.m; ++b) {
        if (slice_count[t][b] != 1) {
          v.ok = false;
          v.violations.push_back("dim " + std::to_string(dim) + ": slice " + std::to_string(t + 1) +
                                 " bin " + std::to_string(b) + " holds " +
                                 std::to_string(slice_count[t][b]) + " points");
        }
      }
    }
  }
  return v;
}

enum class PartitionStrategy { BySliceLabels, Random, RoundRobinSorted };

inline PartitionStrategy partition_strategy_from_name(const std::string& s) {
  if (s == "slices" || s == "by-slice-labels") return PartitionStrategy::BySliceLabels;
  if (s == "random") return PartitionStrategy::Random;
  if (s == "sorted" || s == "round-robin-sorted") return PartitionStrategy::RoundRobinSorted;
  throw std::invalid_argument("unknown partition strategy: " + s);
}

/// Split a dataset into k ordered blocks. `BySliceLabels` copies the design's
/// slices; the other strategies are deterministic functions of (inputs, seed).
inline Partition partition_dataset(const Dataset& ds, int k, PartitionStrategy strategy,
                                   std::uint64_t seed = 0) {
  const int n = ds.n();
  if (k < 1) throw std::invalid_argument("partition_dataset: k must be >= 1");
  if (k > n) throw std::invalid_argument("partition_dataset: k exceeds the number of points");
  Partition part;
  part.blocks.assign(k, {});
  switch (strategy) {
    case PartitionStrategy::BySliceLabels: {
      if (!ds.has_slices()) {
        throw std::invalid_argument("partition_dataset: dataset has no slice labels");
      }
      for (int i = 0; i < n; ++i) {
        const int lab = ds.slice[i];
        if (lab < 1 || lab > k) {
          throw std::invalid_argument("partition_dataset: slice label " + std::to_string(lab) +
                                      " outside 1.." + std::to_string(k));
        }
        part.blocks[lab - 1].push_back(i);
      }
      break;
    }
    case PartitionStrategy::Random: {
      Rng rng = Rng::keyed(seed, 0x9A27);
      std::vector<int> idx = rng.permutation(n);
      // first n % k blocks take the extra point
      int pos = 0;
      for (int b = 0; b < k; ++b) {
        const int sz = n / k + (b < n % k ? 1 : 0);
        for (int j = 0; j < sz; ++j) part.blocks[b].push_back(idx[pos++]);
        std::sort(part.blocks[b].begin(), part.blocks[b].end());
      }
      break;
    }
    case PartitionStrategy::RoundRobinSorted: {
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        for (int d = 0; d < ds.p(); ++d) {
          if (ds.X(a, d) != ds.X(b, d)) return ds.X(a, d) < ds.X(b, d);
        }
        return a < b;
      });
      for (int i = 0; i < n; ++i) part.blocks[i % k].push_back(idx[i]);
      break;
    }
  }
  part.validate(n);
  return part;
}

}  // namespace blockgp

#endif  // BLOCKGP_DESIGN_HPP
