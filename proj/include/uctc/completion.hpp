#pragma once

// Tensor completion from canonical scaling: a missing cell is assigned the
// product of the inverse scaling factors of the subtensors that contain it,
// i.e. exp(-sum of their log coefficients). Known cells pass through.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uctc/canonical_scaling.hpp"
#include "uctc/errors.hpp"
#include "uctc/sparse_tensor.hpp"
#include "uctc/support.hpp"

namespace uctc {

struct CompletionConfig {
  ScalingOptions scaling;
  /// Largest extent box complete_all() will materialise.
  std::uint64_t complete_all_cap = 10'000'000;
};

class CompletionModel {
 public:
  CompletionModel(SparseTensor source, ScalingFamily scaling, ConvergenceReport report)
      : source_(std::move(source)), scaling_(std::move(scaling)), report_(std::move(report)) {
    if (scaling_.layout().extents() != source_.extents()) {
      throw ArgumentError("scaling family was built for a different tensor");
    }
  }

  const SparseTensor& source() const noexcept { return source_; }
  const ScalingFamily& scaling() const noexcept { return scaling_; }
  const ConvergenceReport& report() const noexcept { return report_; }
  int k() const { return scaling_.k(); }
  std::size_t order() const noexcept { return source_.order(); }

  bool is_known(const IndexVector& idx) const { return source_.contains(idx); }

  /// Stored value for known cells; exp(-sum of coefficients) otherwise.
  double predict(const IndexVector& idx, QueryTrace* trace = nullptr) const {
    if (auto v = source_.get(idx)) return *v;
    const double log_sum = scaling_.membership_sum(idx, trace);
    if (trace) ++trace->exponentiations;
    return std::exp(-log_sum);
  }

  /// True when the prediction at idx does not depend on the choice of
  /// scaling gauge: known cells, and missing cells with a hypercube witness.
  bool supported(const IndexVector& idx) const {
    check_bounds(idx, source_.extents());
    return SupportFinder(source_).supported(idx);
  }

 private:
  SparseTensor source_;
  ScalingFamily scaling_;
  ConvergenceReport report_;
};

inline CompletionModel tca(const SparseTensor& tensor, int k, const CompletionConfig& config = {}) {
  if (tensor.empty()) throw DomainError("cannot complete a tensor with no known entries");
  check_subtensor_order(k, tensor.order());
  auto result = csa(tensor, k, config.scaling);
  return {tensor, std::move(result.scaling), std::move(result.report)};
}

/// Matrix completion: tca with k = 1 on a 2-dimensional tensor.
inline CompletionModel mca(const SparseTensor& matrix, const CompletionConfig& config = {}) {
  if (matrix.order() != 2) {
    throw ArgumentError("mca needs a matrix; got order " + std::to_string(matrix.order()));
  }
  return tca(matrix, 1, config);
}

/// Dense-in-box tensor with known values and predictions everywhere else.
inline SparseTensor complete_all(const CompletionModel& model, std::uint64_t cap = 10'000'000) {
  const Extents& ext = model.source().extents();
  const std::uint64_t cells = box_size(ext);
  if (cells > cap) {
    throw CapacityError("extent box has " + std::to_string(cells) + " cells, cap is " +
                        std::to_string(cap) + "; use per-query prediction");
  }
  std::vector<SparseTensor::Entry> entries;
  entries.reserve(cells);
  IndexVector idx(ext.size(), 1);
  do {
    entries.emplace_back(idx, model.predict(idx));
  } while (advance_index(idx, ext));
  return {ext, std::move(entries)};
}

/// Optional post-transform of raw predictions onto a discrete rating scale.
struct RatingScale {
  double min = 1.0;
  double max = 5.0;
  double step = 1.0;

  double apply(double raw) const {
    const double clamped = std::clamp(raw, min, max);
    return std::clamp(min + std::round((clamped - min) / step) * step, min, max);
  }
};

struct RankedPrediction {
  IndexVector idx;
  double raw = 0.0;
  double rating = 0.0;
};

/// Sorts best first by rounded rating; ties are broken by the raw value, then
/// by linear index.
inline void rank_predictions(std::vector<RankedPrediction>& items) {
  std::sort(items.begin(), items.end(), [](const RankedPrediction& a, const RankedPrediction& b) {
    if (a.rating != b.rating) return a.rating > b.rating;
    if (a.raw != b.raw) return a.raw > b.raw;
    return detail::colex_less(a.idx, b.idx);
  });
}

/// Top-n missing cells of one slice (dimension dim fixed at slice) by raw
/// prediction, best first; ties by linear index.
inline std::vector<IndexVector> top_n_missing(const CompletionModel& model, std::size_t dim, int slice,
                                              std::size_t n) {
  const Extents& ext = model.source().extents();
  if (dim >= ext.size() || slice < 1 || slice > ext[dim]) throw BoundsError("slice outside extent box");
  Extents sub = ext;
  sub[dim] = 1;
  std::vector<RankedPrediction> items;
  IndexVector idx(ext.size(), 1);
  do {
    IndexVector cell = idx;
    cell[dim] = slice;
    if (model.is_known(cell)) continue;
    const double raw = model.predict(cell);
    items.push_back({cell, raw, raw});
  } while (advance_index(idx, sub));
  rank_predictions(items);
  std::vector<IndexVector> out;
  for (std::size_t i = 0; i < items.size() && i < n; ++i) out.push_back(items[i].idx);
  return out;
}

}  // namespace uctc
