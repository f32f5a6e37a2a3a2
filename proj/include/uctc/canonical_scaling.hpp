#pragma once

// Canonical scaling: rescale every k-dimensional subtensor so that the
// product of its known entries is 1. Works in natural-log space with cyclic
// in-place (Gauss-Seidel) updates: each non-empty subtensor is re-centred to
// zero log-mean before the next one is visited.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uctc/errors.hpp"
#include "uctc/sparse_tensor.hpp"

namespace uctc {

/// Counters filled by instrumented prediction calls.
struct QueryTrace {
  std::size_t coefficient_lookups = 0;
  std::size_t exponentiations = 0;
};

/// Log-space scaling coefficients, one per subtensor of a layout.
///
/// Sign contract: for every known entry, log A''(idx) = log A(idx) plus the
/// sum of the coefficients of the subtensors containing idx. Subtensors with
/// no known entries keep coefficient 0.
class ScalingFamily {
 public:
  ScalingFamily() = default;
  ScalingFamily(std::shared_ptr<const SubtensorLayout> layout, std::vector<double> log_coeffs)
      : layout_(std::move(layout)), log_coeffs_(std::move(log_coeffs)) {
    if (!layout_ || log_coeffs_.size() != layout_->size()) {
      throw ArgumentError("scaling coefficients do not match subtensor layout");
    }
  }

  int k() const { return layout_->k(); }
  const SubtensorLayout& layout() const { return *layout_; }
  std::shared_ptr<const SubtensorLayout> layout_ptr() const { return layout_; }
  std::size_t size() const noexcept { return log_coeffs_.size(); }
  std::span<const double> log_coeffs() const noexcept { return log_coeffs_; }
  double log_coeff(std::size_t ordinal) const { return log_coeffs_.at(ordinal); }

  /// Coefficient of an arbitrary subtensor id; ids that were never
  /// materialised (no known entries) are 0.
  double log_coeff(const SubtensorId& id) const {
    if (auto i = layout_->find(id)) return log_coeffs_[*i];
    return 0.0;
  }

  /// Sum of coefficients over the subtensors containing idx: one lookup per
  /// fixed-dimension group, C(d,k) in total.
  double membership_sum(std::span<const int> idx, QueryTrace* trace = nullptr) const {
    double sum = 0.0;
    for (std::size_t g = 0; g < layout_->group_count(); ++g) {
      if (trace) ++trace->coefficient_lookups;
      if (auto i = layout_->find(g, idx)) sum += log_coeffs_[*i];
    }
    return sum;
  }

 private:
  std::shared_ptr<const SubtensorLayout> layout_;
  std::vector<double> log_coeffs_;
};

struct ConvergenceReport {
  std::size_t sweeps = 0;
  std::vector<double> v_trace;
  double epsilon = 0.0;
  bool converged = false;
};

class NonConvergenceError : public std::runtime_error {
 public:
  explicit NonConvergenceError(ConvergenceReport report)
      : std::runtime_error("canonical scaling did not converge after " +
                           std::to_string(report.sweeps) + " sweeps (last v = " +
                           (report.v_trace.empty() ? std::string("n/a")
                                                   : std::to_string(report.v_trace.back())) +
                           ")"),
        report_(std::move(report)) {}
  const ConvergenceReport& report() const noexcept { return report_; }

 private:
  ConvergenceReport report_;
};

struct ScalingOptions {
  double epsilon = 1e-12;
  std::size_t max_sweeps = 10000;
  /// Permutation of subtensor groups (fixed-dimension sets) giving the
  /// processing order within a sweep. Empty means natural order; for
  /// k = d-1 group g is dimension g.
  std::vector<std::size_t> group_order;
};

/// Mutable scaling state: log values of the known entries and the running
/// coefficients. One call to sweep() is one full pass.
class CanonicalScaler {
 public:
  /// Largest C(d,k) * (C(d,k) - 1) for which sweeps read precomputed
  /// neighbour streams instead of the entry values.
  static constexpr std::size_t kMaxStreamWidth = 64;

  CanonicalScaler(const SparseTensor& tensor, int k, std::vector<std::size_t> group_order = {})
      : tensor_(&tensor),
        layout_(std::make_shared<const SubtensorLayout>(tensor, k)),
        group_order_(std::move(group_order)) {
    const std::size_t ng = layout_->group_count();
    if (group_order_.empty()) {
      group_order_.resize(ng);
      std::iota(group_order_.begin(), group_order_.end(), std::size_t{0});
    }
    std::vector<bool> seen(ng, false);
    if (group_order_.size() != ng) throw ArgumentError("group order must be a permutation");
    for (std::size_t g : group_order_) {
      if (g >= ng || seen[g]) throw ArgumentError("group order must be a permutation");
      seen[g] = true;
    }
    log_values_.resize(tensor.nnz());
    for (std::size_t e = 0; e < tensor.nnz(); ++e) log_values_[e] = std::log(tensor.value(e));
    log_coeffs_.assign(layout_->size(), 0.0);
    if (ng * (ng - 1) <= kMaxStreamWidth && layout_->size() <= std::numeric_limits<std::uint32_t>::max()) {
      build_streams();
    }
  }

  /// One pass over all non-empty subtensors; returns the sum of squared
  /// corrections applied during this pass.
  double sweep() {
    return streamed() ? sweep_streamed() : sweep_entries();
  }

  /// Current log values of the known entries (input logs plus the
  /// coefficients of every containing subtensor).
  std::span<const double> log_values() const {
    if (!streamed()) return log_values_;
    current_.resize(log_values_.size());
    for (std::size_t e = 0; e < current_.size(); ++e) {
      double x = log_values_[e];
      for (std::size_t i : layout_->entry_subtensors(e)) x += log_coeffs_[i];
      current_[e] = x;
    }
    return current_;
  }

  ScalingFamily scaling() const { return {layout_, log_coeffs_}; }
  const SubtensorLayout& layout() const { return *layout_; }

  SparseTensor canonical() const {
    const auto logs = log_values();
    std::vector<double> values(logs.size());
    for (std::size_t e = 0; e < values.size(); ++e) values[e] = std::exp(logs[e]);
    return tensor_->with_values(values);
  }

 private:
  bool streamed() const noexcept { return !base_sums_.empty(); }

  // Per subtensor: the fixed sum of input logs, and for each member the ids
  // of its other containing subtensors. A sweep then reads these streams
  // sequentially and touches only the (small) coefficient array at random.
  void build_streams() {
    const std::size_t n = layout_->size();
    const std::size_t width = layout_->group_count() - 1;
    base_sums_.assign(n, 0.0);
    stream_offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) stream_offsets_[i + 1] = stream_offsets_[i] + layout_->member_count(i) * width;
    others_.reserve(stream_offsets_.back());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t e : layout_->members(i)) {
        base_sums_[i] += log_values_[e];
        for (std::size_t j : layout_->entry_subtensors(e)) {
          if (j != i) others_.push_back(static_cast<std::uint32_t>(j));
        }
      }
    }
  }

  double sweep_streamed() {
    double v = 0.0;
    const double* coeffs = log_coeffs_.data();
    for (std::size_t g : group_order_) {
      for (std::size_t i = layout_->group_begin(g); i < layout_->group_end(g); ++i) {
        const std::size_t count = layout_->member_count(i);
        if (count == 0) continue;
        double sum = base_sums_[i] + static_cast<double>(count) * log_coeffs_[i];
        for (std::size_t j = stream_offsets_[i]; j < stream_offsets_[i + 1]; ++j) sum += coeffs[others_[j]];
        const double rho = -sum / static_cast<double>(count);
        log_coeffs_[i] += rho;
        v += rho * rho;
      }
    }
    return v;
  }

  double sweep_entries() {
    double v = 0.0;
    for (std::size_t g : group_order_) {
      for (std::size_t i = layout_->group_begin(g); i < layout_->group_end(g); ++i) {
        const auto members = layout_->members(i);
        if (members.empty()) continue;
        double sum = 0.0;
        for (std::size_t e : members) sum += log_values_[e];
        const double rho = -sum / static_cast<double>(members.size());
        for (std::size_t e : members) log_values_[e] += rho;
        log_coeffs_[i] += rho;
        v += rho * rho;
      }
    }
    return v;
  }

  const SparseTensor* tensor_;
  std::shared_ptr<const SubtensorLayout> layout_;
  std::vector<std::size_t> group_order_;
  // Streamed mode: input logs. Entry mode: live values, updated in place.
  std::vector<double> log_values_;
  std::vector<double> log_coeffs_;
  std::vector<double> base_sums_;
  std::vector<std::size_t> stream_offsets_;
  std::vector<std::uint32_t> others_;
  mutable std::vector<double> current_;
};

struct CsaResult {
  SparseTensor canonical;
  ScalingFamily scaling;
  ConvergenceReport report;
};

/// Runs sweeps until the per-sweep v drops below epsilon. Throws
/// NonConvergenceError (carrying the trace) after max_sweeps.
inline CsaResult csa(const SparseTensor& tensor, int k, const ScalingOptions& options = {}) {
  if (!(options.epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  if (options.max_sweeps == 0) throw ArgumentError("max_sweeps must be at least 1");
  CanonicalScaler scaler(tensor, k, options.group_order);
  ConvergenceReport report;
  report.epsilon = options.epsilon;
  while (report.sweeps < options.max_sweeps) {
    const double v = scaler.sweep();
    ++report.sweeps;
    report.v_trace.push_back(v);
    if (v < options.epsilon) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged) throw NonConvergenceError(std::move(report));
  return {scaler.canonical(), scaler.scaling(), std::move(report)};
}

/// Largest |sum of log values| over the non-empty k-dimensional subtensors.
inline double residual(const SparseTensor& tensor, int k) {
  const SubtensorLayout layout(tensor, k);
  std::vector<double> logs(tensor.nnz());
  for (std::size_t e = 0; e < logs.size(); ++e) logs[e] = std::log(tensor.value(e));
  double worst = 0.0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    double sum = 0.0;
    for (std::size_t e : layout.members(i)) sum += logs[e];
    worst = std::max(worst, std::abs(sum));
  }
  return worst;
}

}  // namespace uctc
