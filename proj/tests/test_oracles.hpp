#pragma once

// Brute-force and closed-form references used only by the tests. Nothing
// here calls into the library's algorithms; the point is to cross-check them.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "uctc/sparse_tensor.hpp"

namespace oracle {

using Cells = std::map<std::vector<int>, double>;

/// Every index of the extent box by nested counting (dimension 0 fastest).
inline std::vector<std::vector<int>> enumerate_box(const std::vector<int>& extents) {
  std::vector<std::vector<int>> out;
  std::uint64_t total = 1;
  for (int n : extents) total *= static_cast<std::uint64_t>(n);
  for (std::uint64_t j = 0; j < total; ++j) {
    std::vector<int> idx(extents.size());
    std::uint64_t rest = j;
    for (std::size_t s = 0; s < extents.size(); ++s) {
      idx[s] = static_cast<int>(rest % static_cast<std::uint64_t>(extents[s])) + 1;
      rest /= static_cast<std::uint64_t>(extents[s]);
    }
    out.push_back(idx);
  }
  return out;
}

/// Position of idx in enumerate_box order, 1-based.
inline std::uint64_t brute_flat_index(const std::vector<int>& idx, const std::vector<int>& extents) {
  const auto all = enumerate_box(extents);
  for (std::size_t j = 0; j < all.size(); ++j) {
    if (all[j] == idx) return j + 1;
  }
  return 0;
}

/// All subsets of {0..d-1} of size r, by bitmask scan.
inline std::set<std::vector<int>> subsets(int d, int r) {
  std::set<std::vector<int>> out;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < d; ++i) {
      if (mask & (1u << i)) s.push_back(i);
    }
    if (static_cast<int>(s.size()) == r) out.insert(s);
  }
  return out;
}

/// (fixed dims, fixed coords) of every subtensor containing idx.
inline std::set<std::pair<std::vector<int>, std::vector<int>>> brute_membership(const std::vector<int>& idx, int k) {
  std::set<std::pair<std::vector<int>, std::vector<int>>> out;
  const int d = static_cast<int>(idx.size());
  for (const auto& fixed : subsets(d, d - k)) {
    std::vector<int> coords;
    for (int f : fixed) coords.push_back(idx[f]);
    out.insert({fixed, coords});
  }
  return out;
}

/// Closed-form completion of the missing corner of a 2x2 block.
inline double corner_completion(double r12, double r21, double r11) { return r12 * r21 / r11; }

/// Smallest offset (lexicographic) with all components nonzero whose
/// hypercube corners are all known, by exhaustive scan of [-(n-1), n-1]^d.
inline std::optional<std::vector<int>> brute_witness(const Cells& known, const std::vector<int>& extents,
                                                     const std::vector<int>& idx) {
  const std::size_t d = extents.size();
  std::vector<int> span_ext(d);
  for (std::size_t i = 0; i < d; ++i) span_ext[i] = 2 * extents[i] - 1;
  std::vector<std::vector<int>> offsets;
  for (const auto& raw : enumerate_box(span_ext)) {
    std::vector<int> off(d);
    bool ok = true;
    for (std::size_t i = 0; i < d; ++i) {
      off[i] = raw[i] - extents[i];
      ok = ok && off[i] != 0;
    }
    if (ok) offsets.push_back(off);
  }
  std::sort(offsets.begin(), offsets.end());
  for (const auto& off : offsets) {
    bool all = true;
    for (unsigned delta = 1; delta < (1u << d) && all; ++delta) {
      std::vector<int> c = idx;
      for (std::size_t i = 0; i < d; ++i) {
        if (delta & (1u << i)) c[i] += off[i];
      }
      all = known.count(c) > 0;
    }
    if (all) return off;
  }
  return std::nullopt;
}

inline Cells cells_of(const uctc::SparseTensor& t) {
  Cells out;
  for (std::size_t e = 0; e < t.nnz(); ++e) out[t.index(e)] = t.value(e);
  return out;
}

/// Projection of a onto {x : C x = 0} via a complete orthogonal
/// decomposition of C^T (least-squares s with C^T s = -P a, P the projector
/// onto the row space of C).
struct Projection {
  Eigen::VectorXd x;
  Eigen::VectorXd s;
};

inline Projection project(const Eigen::MatrixXd& C, const Eigen::VectorXd& a) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(C.transpose());
  cod.setThreshold(1e-10);
  const Eigen::VectorXd s = cod.solve(-a);
  Projection p;
  p.s = s;
  p.x = a + C.transpose() * s;
  return p;
}

/// Naive incidence matrix straight from the brute-force membership sets.
struct Incidence {
  Eigen::MatrixXd C;
  Eigen::VectorXd a;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> rows;
};

inline Incidence incidence(const uctc::SparseTensor& t, int k) {
  std::set<std::pair<std::vector<int>, std::vector<int>>> row_set;
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    for (const auto& m : brute_membership(t.index(e), k)) row_set.insert(m);
  }
  Incidence inc;
  inc.rows.assign(row_set.begin(), row_set.end());
  inc.C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(inc.rows.size()), static_cast<Eigen::Index>(t.nnz()));
  inc.a.resize(static_cast<Eigen::Index>(t.nnz()));
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    inc.a[static_cast<Eigen::Index>(e)] = std::log(t.value(e));
    for (const auto& m : brute_membership(t.index(e), k)) {
      const auto r = std::distance(inc.rows.begin(), std::find(inc.rows.begin(), inc.rows.end(), m));
      inc.C(r, static_cast<Eigen::Index>(e)) = 1.0;
    }
  }
  return inc;
}

/// Completion from a brute-force projection: exp(-sum of s over the
/// subtensors containing idx).
inline double projected_completion(const uctc::SparseTensor& t, int k, const std::vector<int>& idx) {
  const auto inc = incidence(t, k);
  const auto p = project(inc.C, inc.a);
  double sum = 0.0;
  for (const auto& m : brute_membership(idx, k)) {
    auto it = std::find(inc.rows.begin(), inc.rows.end(), m);
    if (it != inc.rows.end()) sum += p.s[std::distance(inc.rows.begin(), it)];
  }
  return std::exp(-sum);
}

}  // namespace oracle
