#pragma once

// Synthetic desk-scale experiments: planted consensus triple, one-user
// rescaling, and per-sweep cost versus number of known entries.

#include <algorithm>
#include <array>
#include <chrono>
#include <deque>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "uctc/canonical_scaling.hpp"
#include "uctc/completion.hpp"
#include "uctc/properties.hpp"
#include "uctc/random_instances.hpp"

namespace uctc {

inline double random_rating(Rng& rng) {
  std::uniform_int_distribution<int> r(1, 5);
  return r(rng);
}

// --- consensus ------------------------------------------------------------

struct ConsensusParams {
  int users = 50;
  int base_products = 40;
  double rating_probability = 0.6;
  std::uint64_t seed = 1;
  CompletionConfig config;
};

struct ConsensusResult {
  std::size_t violations = 0;
  std::size_t control_users = 0;
  bool recovered_planted = false;
  PropertyReport report;
  /// (user, prediction for X, Y, Z) per control user.
  std::vector<std::array<double, 4>> rows;
};

/// Users 1..users/2 rate three extra products X, Y, Z as 3, 2, 1; the other
/// half (the control set) never rates them.
inline ConsensusResult run_consensus_experiment(const ConsensusParams& p) {
  if (p.users < 2 || p.base_products < 1) throw ArgumentError("consensus experiment needs >= 2 users and >= 1 product");
  Rng rng(p.seed);
  std::bernoulli_distribution rated(p.rating_probability);
  std::uniform_int_distribution<int> any_product(1, p.base_products);
  std::vector<SparseTensor::Entry> entries;
  for (int u = 1; u <= p.users; ++u) {
    bool any = false;
    for (int j = 1; j <= p.base_products; ++j) {
      if (rated(rng)) {
        entries.push_back({{u, j}, random_rating(rng)});
        any = true;
      }
    }
    if (!any) entries.push_back({{u, any_product(rng)}, random_rating(rng)});
  }
  const int x = p.base_products + 1, y = x + 1, z = x + 2;
  const int raters = p.users / 2;
  for (int u = 1; u <= raters; ++u) {
    entries.push_back({{u, x}, 3.0});
    entries.push_back({{u, y}, 2.0});
    entries.push_back({{u, z}, 1.0});
  }
  const SparseTensor tensor({p.users, z}, std::move(entries));
  const auto model = mca(tensor, p.config);

  ConsensusResult out;
  const auto spec = make_ordering_spec(tensor, 1, {z, y, x});
  out.report = check_consensus_ordering(model, spec);
  out.report.seed = p.seed;
  out.violations = out.report.violation_count;
  for (const auto& found : find_consensus_sets(tensor, 1, 3)) {
    if (found.gamma == std::vector<int>{z, y, x}) out.recovered_planted = true;
  }
  for (int u = raters + 1; u <= p.users; ++u) {
    ++out.control_users;
    out.rows.push_back({static_cast<double>(u), model.predict({u, x}), model.predict({u, y}), model.predict({u, z})});
  }
  return out;
}

// --- fairness -------------------------------------------------------------

struct FairnessParams {
  int users = 30;
  int products = 20;
  int user = 1;
  double factor = 1.25;
  std::size_t top_n = 10;
  std::uint64_t seed = 1;
  double min_density = 0.5;
  double max_density = 0.8;
  CompletionConfig config;
};

struct FairnessResult {
  SparseTensor tensor;
  PropertyReport report;
  std::size_t changed_predictions = 0;
  std::size_t changed_top_lists = 0;
};

/// Integer ratings 1..5 on a fully supported users x products matrix; one
/// user's ratings are multiplied by `factor`.
inline SparseTensor random_rating_matrix(Rng& rng, int users, int products, double min_density, double max_density,
                                         int max_attempts = 1000) {
  std::uniform_real_distribution<double> dens(min_density, max_density);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    auto t = random_tensor(rng, {users, products}, dens(rng), random_rating);
    if (is_fully_supported(t).fully_supported) return t;
  }
  throw ArgumentError("no fully supported rating matrix found");
}

inline FairnessResult run_fairness_experiment(const FairnessParams& p) {
  Rng rng(p.seed);
  FairnessResult out{random_rating_matrix(rng, p.users, p.products, p.min_density, p.max_density), {}, 0, 0};
  out.report = check_scale_fairness(out.tensor, 0, p.user, p.factor, p.config, p.top_n);
  out.report.seed = p.seed;
  out.changed_predictions = static_cast<std::size_t>(out.report.metrics["changed_predictions_other_slices"]);
  out.changed_top_lists = static_cast<std::size_t>(out.report.metrics["changed_top_lists"]);
  return out;
}

// --- scaling --------------------------------------------------------------

struct ScalingParams {
  std::size_t base_entries = 20000;
  int doublings = 5;
  double density = 0.05;
  std::size_t sweeps_per_sample = 10;
  /// Each timing sample repeats sweeps_per_sample batches until at least
  /// this long has elapsed, so small sizes are not dominated by jitter.
  double min_sample_seconds = 0.02;
  int repeats = 15;
  bool run_to_convergence = true;
  std::uint64_t seed = 1;
  CompletionConfig config;
};

struct ScalingRow {
  std::size_t entries = 0;
  Extents extents;
  std::size_t sweeps_to_converge = 0;
  bool converged = false;
  double seconds_per_sweep = 0.0;
  double ratio_to_previous = 0.0;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  double max_ratio = 0.0;
  std::size_t lookups_per_query = 0;
};

/// Per-sweep wall time across doubling sizes. Timing rounds visit every
/// size in turn and keep the fastest sample per size, so slow drift in
/// machine load affects all sizes alike.
inline ScalingResult run_scaling_experiment(const ScalingParams& p) {
  using Clock = std::chrono::steady_clock;
  Rng rng(p.seed);
  std::deque<SparseTensor> tensors;
  std::deque<CanonicalScaler> scalers;
  for (int level = 0; level <= p.doublings; ++level) {
    const std::size_t target = p.base_entries << level;
    const int n = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(target) / p.density)));
    const double density = static_cast<double>(target) / (static_cast<double>(n) * n);
    tensors.push_back(random_tensor(rng, {n, n}, density));
    scalers.emplace_back(tensors.back(), 1);
    scalers.back().sweep();  // warm-up
  }

  std::vector<double> best(tensors.size(), 1e300);
  for (int r = 0; r < p.repeats; ++r) {
    for (std::size_t level = 0; level < tensors.size(); ++level) {
      auto& scaler = scalers[level];
      const auto start = Clock::now();
      std::size_t sweeps = 0;
      std::chrono::duration<double> elapsed{};
      do {
        for (std::size_t s = 0; s < p.sweeps_per_sample; ++s) scaler.sweep();
        sweeps += p.sweeps_per_sample;
        elapsed = Clock::now() - start;
      } while (elapsed.count() < p.min_sample_seconds);
      best[level] = std::min(best[level], elapsed.count() / static_cast<double>(sweeps));
    }
  }

  ScalingResult out;
  for (std::size_t level = 0; level < tensors.size(); ++level) {
    const auto& tensor = tensors[level];
    ScalingRow row;
    row.entries = tensor.nnz();
    row.extents = tensor.extents();
    row.seconds_per_sweep = best[level];
    if (p.run_to_convergence) {
      try {
        const auto result = csa(tensor, 1, p.config.scaling);
        row.sweeps_to_converge = result.report.sweeps;
        row.converged = true;
      } catch (const NonConvergenceError& e) {
        row.sweeps_to_converge = e.report().sweeps;
      }
    }
    if (!out.rows.empty()) {
      row.ratio_to_previous = row.seconds_per_sweep / out.rows.back().seconds_per_sweep;
      out.max_ratio = std::max(out.max_ratio, row.ratio_to_previous);
    }
    out.rows.push_back(row);
  }

  // Instrumented query on a missing cell of the smallest instance.
  const CompletionModel model(tensors.front(), scalers.front().scaling(), {});
  IndexVector cell(2, 1);
  while (model.is_known(cell)) advance_index(cell, tensors.front().extents());
  QueryTrace trace;
  model.predict(cell, &trace);
  out.lookups_per_query = trace.coefficient_lookups;
  return out;
}

}  // namespace uctc
