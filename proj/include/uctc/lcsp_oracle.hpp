#pragma once

// Exact small-instance reference for the log canonical scaling problem.
//
// With a the log values of the known entries (linear-index order) and C the
// 0/1 incidence matrix between non-empty subtensors (rows) and known entries
// (columns), the canonical log tensor is the Euclidean projection of a onto
// {x : Cx = 0}:
//
//   s = -(C C^T)^+ C a,   x = a + C^T s.
//
// The pseudoinverse drops the gauge null space of C C^T. No iteration is
// involved, so this path is independent of the sweep-based solver.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "uctc/canonical_scaling.hpp"
#include "uctc/errors.hpp"
#include "uctc/sparse_tensor.hpp"
#include "uctc/support.hpp"

namespace uctc {

struct ConstraintSystem {
  Eigen::MatrixXd matrix;  // rows: non-empty subtensors; cols: known entries
  Eigen::VectorXd log_values;
  /// Layout ordinal of each row.
  std::vector<std::size_t> row_subtensors;
  std::shared_ptr<const SubtensorLayout> layout;
};

struct OracleLimits {
  std::size_t max_entries = 2000;
  std::size_t max_rows = 2000;
  /// Eigenvalues of C C^T below cutoff * largest are treated as zero.
  double pinv_cutoff = 1e-10;
};

inline ConstraintSystem build_constraints(const SparseTensor& tensor, int k) {
  if (tensor.empty()) throw DomainError("constraint system needs at least one known entry");
  auto layout = std::make_shared<const SubtensorLayout>(tensor, k);
  ConstraintSystem sys;
  for (std::size_t i = 0; i < layout->size(); ++i) {
    if (layout->member_count(i) > 0) sys.row_subtensors.push_back(i);
  }
  const auto rows = static_cast<Eigen::Index>(sys.row_subtensors.size());
  const auto cols = static_cast<Eigen::Index>(tensor.nnz());
  sys.matrix = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (std::size_t e : layout->members(sys.row_subtensors[r])) sys.matrix(r, static_cast<Eigen::Index>(e)) = 1.0;
  }
  sys.log_values.resize(cols);
  for (Eigen::Index c = 0; c < cols; ++c) sys.log_values[c] = std::log(tensor.value(static_cast<std::size_t>(c)));
  sys.layout = std::move(layout);
  return sys;
}

struct LcspSolution {
  Eigen::VectorXd canonical_logs;  // x, one per known entry
  Eigen::VectorXd row_coeffs;      // s, one per constraint row
  ScalingFamily scaling;           // s spread over the full layout (empty subtensors 0)
  double constraint_residual = 0;  // ||C x||_inf
};

inline LcspSolution solve_lcsp(const ConstraintSystem& sys, const OracleLimits& limits = {}) {
  const auto& C = sys.matrix;
  if (static_cast<std::size_t>(C.cols()) > limits.max_entries ||
      static_cast<std::size_t>(C.rows()) > limits.max_rows) {
    throw CapacityError("oracle limited to " + std::to_string(limits.max_entries) + " entries and " +
                        std::to_string(limits.max_rows) + " constraints");
  }
  const Eigen::MatrixXd gram = C * C.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = limits.pinv_cutoff * lambda.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) inv[i] = lambda[i] > cutoff ? 1.0 / lambda[i] : 0.0;
  const Eigen::MatrixXd& V = eig.eigenvectors();

  LcspSolution sol;
  const Eigen::VectorXd rhs = C * sys.log_values;
  sol.row_coeffs = -(V * inv.asDiagonal() * (V.transpose() * rhs));
  sol.canonical_logs = sys.log_values + C.transpose() * sol.row_coeffs;
  sol.constraint_residual = (C * sol.canonical_logs).cwiseAbs().maxCoeff();

  std::vector<double> coeffs(sys.layout->size(), 0.0);
  for (std::size_t r = 0; r < sys.row_subtensors.size(); ++r) {
    coeffs[sys.row_subtensors[r]] = sol.row_coeffs[static_cast<Eigen::Index>(r)];
  }
  sol.scaling = ScalingFamily(sys.layout, std::move(coeffs));
  return sol;
}

inline LcspSolution solve_lcsp(const SparseTensor& tensor, int k, const OracleLimits& limits = {}) {
  if (tensor.nnz() > limits.max_entries) {
    throw CapacityError("oracle limited to " + std::to_string(limits.max_entries) + " known entries");
  }
  return solve_lcsp(build_constraints(tensor, k), limits);
}

struct OracleCompletion {
  double value = 0.0;
  /// False when idx has no full-support witness: the value then depends on
  /// which gauge of the scaling coefficients was picked.
  bool gauge_invariant = false;
};

/// Solves once, answers many completion queries.
class LcspOracle {
 public:
  LcspOracle(const SparseTensor& tensor, int k, const OracleLimits& limits = {})
      : tensor_(tensor), solution_(solve_lcsp(tensor, k, limits)) {}

  const LcspSolution& solution() const noexcept { return solution_; }

  OracleCompletion complete(const IndexVector& idx) const {
    check_bounds(idx, tensor_.extents());
    if (tensor_.contains(idx)) {
      throw ArgumentError("index " + detail::format_index(idx) + " is known");
    }
    const double value = std::exp(-solution_.scaling.membership_sum(idx));
    return {value, SupportFinder(tensor_).supported(idx)};
  }

  /// exp(x) at known entry ordinal e.
  double canonical_value(std::size_t e) const {
    return std::exp(solution_.canonical_logs[static_cast<Eigen::Index>(e)]);
  }

 private:
  SparseTensor tensor_;
  LcspSolution solution_;
};

inline OracleCompletion oracle_complete(const SparseTensor& tensor, int k, const IndexVector& idx,
                                        const OracleLimits& limits = {}) {
  return LcspOracle(tensor, k, limits).complete(idx);
}

struct GaugeCheck {
  bool equivalent = false;
  double max_violation = 0.0;
};

/// Certifies that two scaling families differ by a gauge: the difference's
/// membership sum vanishes at every known entry.
inline GaugeCheck gauge_check(const ScalingFamily& first, const ScalingFamily& second,
                              const SparseTensor& tensor, double tolerance = 1e-8) {
  const auto& la = first.layout();
  const auto& lb = second.layout();
  if (la.k() != lb.k() || la.extents() != tensor.extents() || lb.extents() != tensor.extents()) {
    throw ArgumentError("scaling families do not belong to the same tensor and k");
  }
  GaugeCheck out;
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    const auto idx = tensor.coords(e);
    const double diff = second.membership_sum(idx) - first.membership_sum(idx);
    out.max_violation = std::max(out.max_violation, std::abs(diff));
  }
  out.equivalent = out.max_violation < tolerance;
  return out;
}

}  // namespace uctc
