#pragma once

// Sparse, strictly positive d-dimensional tensors and the subtensor
// bookkeeping used by the scaling and completion code.
//
// Conventions: dimensions are 0-based (they index arrays), coordinates are
// 1-based (1 <= idx[i] <= extents[i]). Entries are kept in ascending
// linear-index order, i.e. colexicographic with dimension 0 varying fastest.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uctc/errors.hpp"

namespace uctc {

using IndexVector = std::vector<int>;
using Extents = std::vector<int>;

namespace detail {

inline std::string format_index(std::span<const int> idx) {
  std::string s = "(";
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(idx[i]);
  }
  return s + ")";
}

// Colexicographic order: the last dimension is most significant. This is the
// order of the linear index J.
inline bool colex_less(std::span<const int> a, std::span<const int> b) {
  for (std::size_t i = a.size(); i-- > 0;) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

inline std::uint64_t binomial(std::size_t n, std::size_t r) {
  if (r > n) return 0;
  std::uint64_t c = 1;
  for (std::size_t i = 1; i <= r; ++i) c = c * (n - r + i) / i;
  return c;
}

// All r-subsets of {0..n-1} in lexicographic order.
inline std::vector<std::vector<int>> combinations(int n, int r) {
  std::vector<std::vector<int>> out;
  if (r < 0 || r > n) return out;
  std::vector<int> cur(r);
  for (int i = 0; i < r; ++i) cur[i] = i;
  while (true) {
    out.push_back(cur);
    int i = r - 1;
    while (i >= 0 && cur[i] == n - r + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < r; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

}  // namespace detail

inline void check_extents(const Extents& extents) {
  if (extents.empty()) throw ArgumentError("tensor needs at least one dimension");
  for (int n : extents) {
    if (n < 1) throw ArgumentError("extents must be positive");
  }
}

inline void check_bounds(std::span<const int> idx, const Extents& extents) {
  if (idx.size() != extents.size()) {
    throw BoundsError("index " + detail::format_index(idx) + " has " +
                      std::to_string(idx.size()) + " coordinates, tensor has " +
                      std::to_string(extents.size()) + " dimensions");
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 1 || idx[i] > extents[i]) {
      throw BoundsError("index " + detail::format_index(idx) + " outside extent box");
    }
  }
}

/// Number of cells in the extent box. Throws CapacityError on overflow.
inline std::uint64_t box_size(const Extents& extents) {
  std::uint64_t cells = 1;
  for (int n : extents) {
    const auto un = static_cast<std::uint64_t>(n);
    if (cells > std::numeric_limits<std::uint64_t>::max() / un) {
      throw CapacityError("extent box does not fit in 64 bits");
    }
    cells *= un;
  }
  return cells;
}

/// 1-based mixed-radix linear index, J = 1 + sum_s (idx_s - 1) * prod_{m<s} n_m.
inline std::uint64_t flat_index(std::span<const int> idx, const Extents& extents) {
  check_bounds(idx, extents);
  box_size(extents);
  std::uint64_t j = 0;
  for (std::size_t s = idx.size(); s-- > 0;) {
    j = j * static_cast<std::uint64_t>(extents[s]) + static_cast<std::uint64_t>(idx[s] - 1);
  }
  return j + 1;
}

/// Inverse of flat_index.
inline IndexVector unflatten_index(std::uint64_t j, const Extents& extents) {
  if (j < 1 || j > box_size(extents)) throw BoundsError("linear index outside extent box");
  IndexVector idx(extents.size());
  std::uint64_t rem = j - 1;
  for (std::size_t s = 0; s < extents.size(); ++s) {
    const auto n = static_cast<std::uint64_t>(extents[s]);
    idx[s] = static_cast<int>(rem % n) + 1;
    rem /= n;
  }
  return idx;
}

/// Steps idx to the next cell in linear-index order. Returns false after the
/// last cell (idx is then reset to all ones).
inline bool advance_index(IndexVector& idx, const Extents& extents) {
  for (std::size_t s = 0; s < idx.size(); ++s) {
    if (idx[s] < extents[s]) {
      ++idx[s];
      return true;
    }
    idx[s] = 1;
  }
  return false;
}

class SparseTensor {
 public:
  using Entry = std::pair<IndexVector, double>;

  SparseTensor() = default;

  SparseTensor(Extents extents, std::vector<Entry> entries) : extents_(std::move(extents)) {
    check_extents(extents_);
    const std::size_t d = extents_.size();
    for (const auto& [idx, value] : entries) {
      check_bounds(idx, extents_);
      if (!(value > 0.0) || !std::isfinite(value)) {
        throw DomainError("entry " + detail::format_index(idx) +
                          " must be strictly positive and finite");
      }
    }
    std::vector<std::size_t> order(entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return detail::colex_less(entries[a].first, entries[b].first);
    });
    coords_.reserve(entries.size() * d);
    values_.reserve(entries.size());
    for (std::size_t n = 0; n < order.size(); ++n) {
      const auto& [idx, value] = entries[order[n]];
      if (n > 0 && !detail::colex_less(entries[order[n - 1]].first, idx)) {
        throw DuplicateError("duplicate entry at " + detail::format_index(idx));
      }
      coords_.insert(coords_.end(), idx.begin(), idx.end());
      values_.push_back(value);
    }
  }

  std::size_t order() const noexcept { return extents_.size(); }
  const Extents& extents() const noexcept { return extents_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  /// Coordinates of the e-th known entry (entries sorted by linear index).
  std::span<const int> coords(std::size_t e) const {
    return {coords_.data() + e * order(), order()};
  }
  IndexVector index(std::size_t e) const {
    auto c = coords(e);
    return {c.begin(), c.end()};
  }
  double value(std::size_t e) const { return values_[e]; }
  std::span<const double> values() const noexcept { return values_; }

  /// Entry ordinal of idx, or nullopt when idx is missing.
  std::optional<std::size_t> find(std::span<const int> idx) const {
    check_bounds(idx, extents_);
    std::size_t lo = 0, hi = nnz();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (detail::colex_less(coords(mid), idx)) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    if (lo < nnz() && !detail::colex_less(idx, coords(lo))) return lo;
    return std::nullopt;
  }

  std::optional<double> get(std::span<const int> idx) const {
    if (auto e = find(idx)) return values_[*e];
    return std::nullopt;
  }

  bool contains(std::span<const int> idx) const { return find(idx).has_value(); }

  /// Same support, new values (validated like the constructor's).
  SparseTensor with_values(std::span<const double> values) const {
    if (values.size() != nnz()) throw ArgumentError("value count does not match support");
    SparseTensor out = *this;
    for (std::size_t e = 0; e < values.size(); ++e) {
      if (!(values[e] > 0.0) || !std::isfinite(values[e])) {
        throw DomainError("entry " + detail::format_index(coords(e)) +
                          " must be strictly positive and finite");
      }
    }
    out.values_.assign(values.begin(), values.end());
    return out;
  }

  /// Number of known entries in each slice of dimension dim (index j-1).
  std::vector<std::size_t> slice_counts(std::size_t dim) const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(extents_.at(dim)), 0);
    for (std::size_t e = 0; e < nnz(); ++e) ++counts[coords(e)[dim] - 1];
    return counts;
  }

  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    out.reserve(nnz());
    for (std::size_t e = 0; e < nnz(); ++e) out.emplace_back(index(e), values_[e]);
    return out;
  }

  friend bool operator==(const SparseTensor&, const SparseTensor&) = default;

 private:
  Extents extents_;
  std::vector<int> coords_;
  std::vector<double> values_;
};

/// A k-dimensional subtensor: the cells whose coordinates on fixed_dims equal
/// fixed_coords. For k = d-1 there is one fixed dimension and the id is the
/// slice (dimension(), slice()).
struct SubtensorId {
  std::vector<int> fixed_dims;
  IndexVector fixed_coords;

  int dimension() const { return fixed_dims.at(0); }
  int slice() const { return fixed_coords.at(0); }

  bool contains(std::span<const int> idx) const {
    for (std::size_t m = 0; m < fixed_dims.size(); ++m) {
      if (idx[fixed_dims[m]] != fixed_coords[m]) return false;
    }
    return true;
  }

  friend auto operator<=>(const SubtensorId&, const SubtensorId&) = default;
  friend bool operator==(const SubtensorId&, const SubtensorId&) = default;
};

inline std::string to_string(const SubtensorId& id) {
  std::string s = "{";
  for (std::size_t m = 0; m < id.fixed_dims.size(); ++m) {
    if (m) s += ',';
    s += "d" + std::to_string(id.fixed_dims[m] + 1) + "=" + std::to_string(id.fixed_coords[m]);
  }
  return s + "}";
}

inline void check_subtensor_order(int k, std::size_t d) {
  if (k < 1 || static_cast<std::size_t>(k) + 1 > d) {
    throw ArgumentError("subtensor dimensionality k=" + std::to_string(k) +
                        " outside [1, d-1] for d=" + std::to_string(d));
  }
}

/// Incidence structure between known entries and k-dimensional subtensors.
///
/// Subtensors are grouped by their fixed-dimension set (one group per
/// flattening); groups are ordered lexicographically by fixed dimensions, and
/// within a group ids ascend lexicographically by fixed coordinates. For
/// k = d-1 every slice gets an id, empty or not; for smaller k only
/// coordinate combinations occupied by a known entry are materialised.
class SubtensorLayout {
 public:
  SubtensorLayout(const SparseTensor& tensor, int k)
      : extents_(tensor.extents()), k_(k) {
    const std::size_t d = tensor.order();
    check_subtensor_order(k, d);
    groups_ = detail::combinations(static_cast<int>(d), static_cast<int>(d) - k);
    const std::size_t nnz = tensor.nnz();
    if (nnz > std::numeric_limits<std::uint32_t>::max()) {
      throw CapacityError("subtensor layout supports at most 2^32 - 1 known entries");
    }
    const std::size_t ng = groups_.size();
    entry_subtensors_.assign(nnz * ng, 0);
    group_begin_.push_back(0);

    if (is_slice_layout()) {
      for (std::size_t g = 0; g < ng; ++g) {
        const int dim = groups_[g][0];
        for (int j = 1; j <= extents_[dim]; ++j) ids_.push_back({{dim}, {j}});
        group_begin_.push_back(ids_.size());
        for (std::size_t e = 0; e < nnz; ++e) {
          entry_subtensors_[e * ng + g] = group_begin_[g] + tensor.coords(e)[dim] - 1;
        }
      }
    } else {
      lookup_.resize(ng);
      for (std::size_t g = 0; g < ng; ++g) {
        const auto& fixed = groups_[g];
        std::map<IndexVector, std::vector<std::size_t>> buckets;
        for (std::size_t e = 0; e < nnz; ++e) {
          buckets[project(tensor.coords(e), fixed)].push_back(e);
        }
        for (auto& [key, list] : buckets) {
          const std::size_t ordinal = ids_.size();
          lookup_[g].emplace(key, ordinal);
          for (std::size_t e : list) entry_subtensors_[e * ng + g] = ordinal;
          ids_.push_back({fixed, key});
        }
        group_begin_.push_back(ids_.size());
      }
    }

    // CSR member lists; entries are visited in linear-index order so each
    // list is ascending.
    member_offsets_.assign(ids_.size() + 1, 0);
    for (std::size_t e = 0; e < nnz; ++e) {
      for (std::size_t g = 0; g < ng; ++g) ++member_offsets_[entry_subtensors_[e * ng + g] + 1];
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) member_offsets_[i + 1] += member_offsets_[i];
    member_entries_.resize(member_offsets_.back());
    std::vector<std::size_t> fill(member_offsets_.begin(), member_offsets_.end() - 1);
    for (std::size_t e = 0; e < nnz; ++e) {
      for (std::size_t g = 0; g < ng; ++g) member_entries_[fill[entry_subtensors_[e * ng + g]]++] = static_cast<std::uint32_t>(e);
    }
  }

  int k() const noexcept { return k_; }
  std::size_t order() const noexcept { return extents_.size(); }
  const Extents& extents() const noexcept { return extents_; }
  bool is_slice_layout() const noexcept { return static_cast<std::size_t>(k_) + 1 == order(); }

  std::size_t group_count() const noexcept { return groups_.size(); }
  const std::vector<int>& group_dims(std::size_t g) const { return groups_.at(g); }
  std::size_t group_begin(std::size_t g) const { return group_begin_.at(g); }
  std::size_t group_end(std::size_t g) const { return group_begin_.at(g + 1); }

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<SubtensorId>& ids() const noexcept { return ids_; }
  const SubtensorId& id(std::size_t i) const { return ids_.at(i); }

  std::span<const std::uint32_t> members(std::size_t i) const {
    return {member_entries_.data() + member_offsets_[i], member_offsets_[i + 1] - member_offsets_[i]};
  }
  std::size_t member_count(std::size_t i) const { return member_offsets_[i + 1] - member_offsets_[i]; }

  /// Ordinals of the subtensors containing known entry e, one per group.
  std::span<const std::size_t> entry_subtensors(std::size_t e) const {
    return {entry_subtensors_.data() + e * group_count(), group_count()};
  }

  /// Ordinal of the group-g subtensor containing idx, or nullopt if that
  /// subtensor has no materialised id (only possible for k < d-1).
  std::optional<std::size_t> find(std::size_t g, std::span<const int> idx) const {
    if (is_slice_layout()) return group_begin_[g] + idx[groups_[g][0]] - 1;
    const auto& m = lookup_[g];
    auto it = m.find(project(idx, groups_[g]));
    if (it == m.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> find(const SubtensorId& id) const {
    auto git = std::find(groups_.begin(), groups_.end(), id.fixed_dims);
    if (git == groups_.end()) return std::nullopt;
    const auto g = static_cast<std::size_t>(git - groups_.begin());
    for (std::size_t m = 0; m < id.fixed_dims.size(); ++m) {
      if (id.fixed_coords.at(m) < 1 || id.fixed_coords[m] > extents_[id.fixed_dims[m]]) return std::nullopt;
    }
    if (is_slice_layout()) return group_begin_[g] + id.fixed_coords[0] - 1;
    auto it = lookup_[g].find(id.fixed_coords);
    if (it == lookup_[g].end()) return std::nullopt;
    return it->second;
  }

 private:
  static IndexVector project(std::span<const int> idx, const std::vector<int>& dims) {
    IndexVector key(dims.size());
    for (std::size_t m = 0; m < dims.size(); ++m) key[m] = idx[dims[m]];
    return key;
  }

  Extents extents_;
  int k_;
  std::vector<std::vector<int>> groups_;
  std::vector<std::size_t> group_begin_;
  std::vector<SubtensorId> ids_;
  std::vector<std::size_t> member_offsets_;
  std::vector<std::uint32_t> member_entries_;  // 32-bit to halve sweep memory traffic
  std::vector<std::size_t> entry_subtensors_;
  std::vector<std::map<IndexVector, std::size_t>> lookup_;
};

/// All k-dimensional subtensor ids of tensor (see SubtensorLayout for order
/// and which ids are materialised).
inline std::vector<SubtensorId> subtensor_ids(const SparseTensor& tensor, int k) {
  return SubtensorLayout(tensor, k).ids();
}

/// Known entries of the subtensor, ascending by linear index.
inline std::vector<IndexVector> members(const SparseTensor& tensor, const SubtensorId& id) {
  if (id.fixed_dims.size() != id.fixed_coords.size() || id.fixed_dims.empty() ||
      id.fixed_dims.size() >= tensor.order()) {
    throw ArgumentError("malformed subtensor id " + to_string(id));
  }
  for (std::size_t m = 0; m < id.fixed_dims.size(); ++m) {
    const int dim = id.fixed_dims[m];
    if (dim < 0 || static_cast<std::size_t>(dim) >= tensor.order() ||
        (m > 0 && dim <= id.fixed_dims[m - 1])) {
      throw ArgumentError("malformed subtensor id " + to_string(id));
    }
    if (id.fixed_coords[m] < 1 || id.fixed_coords[m] > tensor.extents()[dim]) {
      throw BoundsError("subtensor id " + to_string(id) + " outside extent box");
    }
  }
  std::vector<IndexVector> out;
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    if (id.contains(tensor.coords(e))) out.push_back(tensor.index(e));
  }
  return out;
}

/// Ids of every k-dimensional subtensor containing idx: one per fixed
/// dimension set, in layout group order. For k = d-1 these are the d slices
/// (i, idx[i]).
inline std::vector<SubtensorId> membership(std::span<const int> idx, int k, std::size_t d) {
  if (idx.size() != d) throw ArgumentError("index has wrong number of coordinates");
  check_subtensor_order(k, d);
  for (int c : idx) {
    if (c < 1) throw BoundsError("coordinates are 1-based");
  }
  std::vector<SubtensorId> out;
  for (auto& fixed : detail::combinations(static_cast<int>(d), static_cast<int>(d) - k)) {
    IndexVector coords;
    for (int dim : fixed) coords.push_back(idx[dim]);
    out.push_back({std::move(fixed), std::move(coords)});
  }
  return out;
}

}  // namespace uctc
