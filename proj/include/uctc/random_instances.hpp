#pragma once

// Seeded generators for synthetic test and experiment instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "uctc/errors.hpp"
#include "uctc/sparse_tensor.hpp"
#include "uctc/support.hpp"

namespace uctc {

using Rng = std::mt19937_64;

/// Log-uniform positive value in [e^-spread, e^spread].
inline double log_uniform(Rng& rng, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  return std::exp(u(rng));
}

/// Exactly ceil(density * cells) distinct cells, chosen uniformly, each with
/// a value drawn by `value`.
inline SparseTensor random_tensor(Rng& rng, const Extents& extents, double density,
                                  const std::function<double(Rng&)>& value) {
  const auto cells = box_size(extents);
  if (density * static_cast<double>(cells) > 5e6) throw CapacityError("random_tensor too large");
  if (density <= 0.0 || density > 1.0) throw ArgumentError("density must be in (0, 1]");
  const auto count = static_cast<std::uint64_t>(std::ceil(density * static_cast<double>(cells)));
  std::vector<std::uint64_t> pick;
  if (count * 4 < cells) {
    // Sparse: rejection sampling keeps memory proportional to count.
    std::unordered_set<std::uint64_t> taken;
    std::uniform_int_distribution<std::uint64_t> dist(1, cells);
    while (pick.size() < count) {
      const auto j = dist(rng);
      if (taken.insert(j).second) pick.push_back(j);
    }
  } else {
    pick.resize(cells);
    std::iota(pick.begin(), pick.end(), std::uint64_t{1});
    // Partial Fisher-Yates.
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::uint64_t> dist(i, cells - 1);
      std::swap(pick[i], pick[dist(rng)]);
    }
  }
  std::sort(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(count));
  std::vector<SparseTensor::Entry> entries;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) entries.emplace_back(unflatten_index(pick[i], extents), value(rng));
  return {extents, std::move(entries)};
}

inline SparseTensor random_tensor(Rng& rng, const Extents& extents, double density, double log_spread = 2.0) {
  return random_tensor(rng, extents, density, [log_spread](Rng& r) { return log_uniform(r, log_spread); });
}

struct InstanceShape {
  std::size_t order = 2;
  int min_extent = 2;
  int max_extent = 10;
  double min_density = 0.3;
  double max_density = 0.9;
  double log_spread = 2.0;
};

/// Draws shapes and instances until one is fully supported.
inline SparseTensor random_full_support_tensor(Rng& rng, const InstanceShape& shape, int max_attempts = 1000) {
  std::uniform_int_distribution<int> ext(shape.min_extent, shape.max_extent);
  std::uniform_real_distribution<double> dens(shape.min_density, shape.max_density);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Extents extents(shape.order);
    for (auto& n : extents) n = ext(rng);
    auto tensor = random_tensor(rng, extents, dens(rng), shape.log_spread);
    if (is_fully_supported(tensor).fully_supported) return tensor;
  }
  throw ArgumentError("no fully supported instance found after " + std::to_string(max_attempts) + " attempts");
}

}  // namespace uctc
