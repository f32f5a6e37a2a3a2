#pragma once

// Full-support detection: a missing cell is supported when it is one vertex
// of an axis-aligned hypercube whose other 2^d - 1 vertices are all known.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "uctc/errors.hpp"
#include "uctc/sparse_tensor.hpp"

namespace uctc {

struct SupportWitness {
  IndexVector missing;
  /// Per-dimension offset; every component is nonzero.
  std::vector<int> offset;
  /// missing + delta * offset for delta = 1 .. 2^d - 1 (bit i of delta
  /// selects dimension i), in that order.
  std::vector<IndexVector> corners;
};

struct SupportResult {
  bool fully_supported = true;
  std::vector<IndexVector> failures;
  std::size_t scanned = 0;
};

class SupportCapacityError : public CapacityError {
 public:
  SupportCapacityError(const std::string& what, SupportResult partial)
      : CapacityError(what), partial_(std::move(partial)) {}
  const SupportResult& partial() const noexcept { return partial_; }

 private:
  SupportResult partial_;
};

/// Witness search over one tensor. Candidate offsets in dimension i are the
/// differences to occupied slices of i; the search is depth-first over
/// dimensions with ascending candidates, so the first hit is the
/// lexicographically smallest offset.
class SupportFinder {
 public:
  explicit SupportFinder(const SparseTensor& tensor) : tensor_(&tensor) {
    const std::size_t d = tensor.order();
    if (d > 20) throw CapacityError("support search limited to d <= 20");
    occupied_.resize(d);
    for (std::size_t dim = 0; dim < d; ++dim) {
      const auto counts = tensor.slice_counts(dim);
      for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] > 0) occupied_[dim].push_back(static_cast<int>(j) + 1);
      }
    }
  }

  std::optional<SupportWitness> witness(const IndexVector& idx) const {
    if (tensor_->contains(idx)) {
      throw ArgumentError("index " + detail::format_index(idx) + " is known; witnesses are for missing cells");
    }
    std::vector<int> offset(idx.size(), 0);
    if (!search(idx, offset, 0)) return std::nullopt;
    SupportWitness w{idx, offset, {}};
    const std::uint32_t full = (1u << idx.size()) - 1;
    for (std::uint32_t delta = 1; delta <= full; ++delta) w.corners.push_back(corner(idx, offset, delta));
    return w;
  }

  bool supported(const IndexVector& idx) const {
    if (tensor_->contains(idx)) return true;
    std::vector<int> offset(idx.size(), 0);
    return search(idx, offset, 0);
  }

 private:
  static IndexVector corner(const IndexVector& idx, const std::vector<int>& offset, std::uint32_t delta) {
    IndexVector c = idx;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (delta & (1u << i)) c[i] += offset[i];
    }
    return c;
  }

  // Offsets for dimensions < dim are fixed. Corners whose highest selected
  // dimension is dim become checkable once offset[dim] is chosen.
  bool search(const IndexVector& idx, std::vector<int>& offset, std::size_t dim) const {
    if (dim == idx.size()) return true;
    const std::uint32_t top = 1u << dim;
    for (int j : occupied_[dim]) {
      if (j == idx[dim]) continue;
      offset[dim] = j - idx[dim];
      bool ok = true;
      for (std::uint32_t low = 0; low < top && ok; ++low) {
        ok = tensor_->contains(corner(idx, offset, top | low));
      }
      if (ok && search(idx, offset, dim + 1)) return true;
    }
    offset[dim] = 0;
    return false;
  }

  const SparseTensor* tensor_;
  std::vector<std::vector<int>> occupied_;
};

inline std::optional<SupportWitness> witness(const SparseTensor& tensor, const IndexVector& idx) {
  check_bounds(idx, tensor.extents());
  return SupportFinder(tensor).witness(idx);
}

/// Scans every missing cell in linear-index order. Throws
/// SupportCapacityError (with what was found so far) once more than
/// max_missing cells would need scanning.
inline SupportResult is_fully_supported(const SparseTensor& tensor, std::uint64_t max_missing = 1'000'000) {
  const SupportFinder finder(tensor);
  SupportResult result;
  IndexVector idx(tensor.order(), 1);
  do {
    if (tensor.contains(idx)) continue;
    if (result.scanned == max_missing) {
      result.fully_supported = result.failures.empty();
      throw SupportCapacityError("more than " + std::to_string(max_missing) +
                                     " missing cells; support scan stopped",
                                 std::move(result));
    }
    ++result.scanned;
    if (!finder.supported(idx)) result.failures.push_back(idx);
  } while (advance_index(idx, tensor.extents()));
  result.fully_supported = result.failures.empty();
  return result;
}

}  // namespace uctc
