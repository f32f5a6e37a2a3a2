#pragma once

// Delimited rating files <-> SparseTensor with stable string-id maps.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uctc/errors.hpp"
#include "uctc/sparse_tensor.hpp"

namespace uctc {

enum class ColumnRole { kKey, kValue, kSkip };
enum class DedupePolicy { kNone, kLast, kMeanLog };

/// value' = scale * value + shift; value' must be > 0.
struct ValueTransform {
  double scale = 1.0;
  double shift = 0.0;
  double apply(double v) const { return scale * v + shift; }
};

struct Schema {
  std::vector<ColumnRole> columns{ColumnRole::kKey, ColumnRole::kKey, ColumnRole::kValue};
  std::string delimiter = ",";
  bool header = false;
  ValueTransform transform;
  DedupePolicy dedupe = DedupePolicy::kNone;

  std::size_t key_count() const {
    std::size_t n = 0;
    for (auto c : columns) n += c == ColumnRole::kKey;
    return n;
  }

  void validate() const {
    std::size_t values = 0;
    for (auto c : columns) values += c == ColumnRole::kValue;
    if (values != 1) throw ArgumentError("schema needs exactly one value column");
    if (key_count() < 2) throw ArgumentError("schema needs at least two key columns");
    if (delimiter.empty()) throw ArgumentError("delimiter must not be empty");
  }
};

/// Parses "key,key,value,skip"-style role lists.
inline std::vector<ColumnRole> parse_column_roles(std::string_view text) {
  std::vector<ColumnRole> roles;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto next = std::min(text.find(',', pos), text.size());
    const auto word = text.substr(pos, next - pos);
    if (word == "key") {
      roles.push_back(ColumnRole::kKey);
    } else if (word == "value") {
      roles.push_back(ColumnRole::kValue);
    } else if (word == "skip") {
      roles.push_back(ColumnRole::kSkip);
    } else {
      throw ArgumentError("unknown column role '" + std::string(word) + "' (expected key, value or skip)");
    }
    pos = next + 1;
  }
  return roles;
}

inline DedupePolicy parse_dedupe(std::string_view text) {
  if (text == "none") return DedupePolicy::kNone;
  if (text == "last") return DedupePolicy::kLast;
  if (text == "mean-log") return DedupePolicy::kMeanLog;
  throw ArgumentError("unknown dedupe policy '" + std::string(text) + "'");
}

/// Per-dimension bijection between external ids and 1-based coordinates,
/// assigned in first-seen order.
class IdMap {
 public:
  IdMap() = default;
  explicit IdMap(std::size_t order) : names_(order), lookup_(order) {}

  std::size_t order() const noexcept { return names_.size(); }
  std::size_t size(std::size_t dim) const { return names_.at(dim).size(); }
  const std::vector<std::string>& names(std::size_t dim) const { return names_.at(dim); }

  Extents extents() const {
    Extents e;
    for (const auto& n : names_) e.push_back(static_cast<int>(n.size()));
    return e;
  }

  /// Coordinate for id, adding it when new.
  int intern(std::size_t dim, const std::string& id) {
    auto [it, inserted] = lookup_.at(dim).emplace(id, static_cast<int>(names_[dim].size()) + 1);
    if (inserted) names_[dim].push_back(id);
    return it->second;
  }

  std::optional<int> find(std::size_t dim, const std::string& id) const {
    const auto& m = lookup_.at(dim);
    auto it = m.find(id);
    if (it == m.end()) return std::nullopt;
    return it->second;
  }

  IndexVector resolve(const std::vector<std::string>& ids) const {
    if (ids.size() != order()) {
      throw ArgumentError("expected " + std::to_string(order()) + " ids, got " + std::to_string(ids.size()));
    }
    IndexVector idx(ids.size());
    for (std::size_t d = 0; d < ids.size(); ++d) {
      auto c = find(d, ids[d]);
      if (!c) throw LookupError("unknown id '" + ids[d] + "' in dimension " + std::to_string(d + 1));
      idx[d] = *c;
    }
    return idx;
  }

  std::vector<std::string> names_of(std::span<const int> idx) const {
    if (idx.size() != order()) throw ArgumentError("index has wrong number of coordinates");
    std::vector<std::string> out;
    for (std::size_t d = 0; d < idx.size(); ++d) {
      if (idx[d] < 1 || static_cast<std::size_t>(idx[d]) > names_[d].size()) {
        throw LookupError("coordinate " + std::to_string(idx[d]) + " not mapped in dimension " + std::to_string(d + 1));
      }
      out.push_back(names_[d][idx[d] - 1]);
    }
    return out;
  }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::vector<std::string>> names_;
  std::vector<std::unordered_map<std::string, int>> lookup_;
};

struct RatingData {
  SparseTensor tensor;
  IdMap ids;
  std::size_t records = 0;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, std::string_view delim) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(delim, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + delim.size();
  }
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads one record per non-blank line. Pass `seed` to keep coordinates of
/// an existing id map (new ids are appended after it).
inline RatingData parse_ratings(std::istream& in, const Schema& schema, IdMap seed = {}) {
  schema.validate();
  const std::size_t d = schema.key_count();
  IdMap ids = seed.order() == 0 ? IdMap(d) : std::move(seed);
  if (ids.order() != d) throw ArgumentError("id map order does not match schema");

  struct Slot {
    double log_sum = 0.0;
    double value = 0.0;
    std::size_t count = 0;
  };
  std::map<IndexVector, Slot> cells;
  std::vector<IndexVector> order_seen;
  std::size_t records = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && schema.header) continue;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto fields = detail::split(text, schema.delimiter);
    if (fields.size() != schema.columns.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(schema.columns.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       lineno);
    }
    IndexVector idx;
    std::optional<double> raw;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto field = detail::trim(fields[c]);
      switch (schema.columns[c]) {
        case ColumnRole::kKey:
          if (field.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty key", lineno);
          idx.push_back(ids.intern(idx.size(), std::string(field)));
          break;
        case ColumnRole::kValue:
          raw = detail::parse_double(field);
          if (!raw) {
            throw ParseError("line " + std::to_string(lineno) + ": value '" + std::string(field) + "' is not a number",
                             lineno);
          }
          break;
        case ColumnRole::kSkip:
          break;
      }
    }
    const double value = schema.transform.apply(*raw);
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw RecordError("line " + std::to_string(lineno) + ": transformed value " + std::to_string(value) +
                            " is not strictly positive (0 means absent)",
                        lineno);
    }
    ++records;
    auto [it, inserted] = cells.try_emplace(idx);
    if (inserted) {
      order_seen.push_back(idx);
    } else if (schema.dedupe == DedupePolicy::kNone) {
      throw DuplicateError("line " + std::to_string(lineno) + ": duplicate record for " + detail::format_index(idx),
                           lineno);
    }
    auto& slot = it->second;
    slot.value = value;
    slot.log_sum += std::log(value);
    ++slot.count;
  }

  std::vector<SparseTensor::Entry> entries;
  entries.reserve(cells.size());
  for (const auto& idx : order_seen) {
    const auto& slot = cells.at(idx);
    const double v = schema.dedupe == DedupePolicy::kMeanLog ? std::exp(slot.log_sum / static_cast<double>(slot.count))
                                                              : slot.value;
    entries.emplace_back(idx, v);
  }
  Extents extents = ids.extents();
  for (auto& n : extents) n = std::max(n, 1);
  return {SparseTensor(extents, std::move(entries)), std::move(ids), records};
}

inline RatingData parse_ratings(const std::string& text, const Schema& schema, IdMap seed = {}) {
  std::istringstream in(text);
  return parse_ratings(in, schema, std::move(seed));
}

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Canonical ratings output: "id_1<delim>...<delim>id_d<delim>value", one line
/// per known entry in linear-index order, values printed round-trip exact.
inline void write_ratings(std::ostream& out, const SparseTensor& tensor, const IdMap& ids,
                          const std::string& delimiter = ",") {
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    for (const auto& name : ids.names_of(tensor.coords(e))) out << name << delimiter;
    out << format_value(tensor.value(e)) << '\n';
  }
}

/// Sidecar id map: "dimension,coordinate,id" lines, dimensions 1-based.
inline void write_id_map(std::ostream& out, const IdMap& ids) {
  for (std::size_t d = 0; d < ids.order(); ++d) {
    for (std::size_t c = 0; c < ids.size(d); ++c) out << d + 1 << ',' << c + 1 << ',' << ids.names(d)[c] << '\n';
  }
}

inline IdMap read_id_map(std::istream& in) {
  std::vector<std::vector<std::pair<int, std::string>>> dims;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto first = text.find(',');
    const auto second = first == std::string_view::npos ? first : text.find(',', first + 1);
    if (second == std::string_view::npos) throw ParseError("id map line " + std::to_string(lineno) + " malformed", lineno);
    int dim = 0, coord = 0;
    auto r1 = std::from_chars(text.data(), text.data() + first, dim);
    auto r2 = std::from_chars(text.data() + first + 1, text.data() + second, coord);
    if (r1.ec != std::errc() || r2.ec != std::errc() || dim < 1 || coord < 1) {
      throw ParseError("id map line " + std::to_string(lineno) + " malformed", lineno);
    }
    if (dims.size() < static_cast<std::size_t>(dim)) dims.resize(dim);
    dims[dim - 1].emplace_back(coord, std::string(text.substr(second + 1)));
  }
  IdMap ids(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) {
    std::sort(dims[d].begin(), dims[d].end());
    for (std::size_t c = 0; c < dims[d].size(); ++c) {
      if (dims[d][c].first != static_cast<int>(c) + 1) throw ParseError("id map coordinates not contiguous", 0);
      if (ids.intern(d, dims[d][c].second) != static_cast<int>(c) + 1) throw ParseError("id map repeats an id", 0);
    }
  }
  return ids;
}

/// 64-bit FNV-1a over the canonical ratings text, as 16 hex digits.
inline std::string content_digest(const SparseTensor& tensor, const IdMap& ids) {
  std::ostringstream text;
  write_ratings(text, tensor, ids);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text.str()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace uctc
