#pragma once

// Versioned JSON model artifact: source entries, id maps, log-space
// coefficients, convergence report, effective config and a digest of the
// source ratings.

#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uctc/completion.hpp"
#include "uctc/errors.hpp"
#include "uctc/ingest.hpp"

namespace uctc {

inline constexpr const char* kModelFormat = "uctc-model";
inline constexpr int kModelVersion = 1;

struct ModelArtifact {
  CompletionModel model;
  IdMap ids;
  nlohmann::json config;
  std::string source_digest;
};

inline nlohmann::json report_to_json(const ConvergenceReport& r) {
  return {{"sweeps", r.sweeps}, {"converged", r.converged}, {"epsilon", r.epsilon}, {"v_trace", r.v_trace}};
}

inline nlohmann::json model_to_json(const CompletionModel& model, const IdMap& ids, const nlohmann::json& config) {
  const auto& src = model.source();
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["order"] = src.order();
  j["k"] = model.k();
  j["extents"] = src.extents();
  j["config"] = config;
  nlohmann::json names = nlohmann::json::array();
  for (std::size_t d = 0; d < ids.order(); ++d) names.push_back(ids.names(d));
  j["ids"] = names;
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t e = 0; e < src.nnz(); ++e) {
    nlohmann::json row(src.index(e));
    row.push_back(src.value(e));
    entries.push_back(std::move(row));
  }
  j["entries"] = std::move(entries);
  nlohmann::json subs = nlohmann::json::array();
  const auto& layout = model.scaling().layout();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    subs.push_back({{"fixed_dims", layout.id(i).fixed_dims},
                    {"fixed_coords", layout.id(i).fixed_coords},
                    {"log_coeff", model.scaling().log_coeff(i)}});
  }
  j["subtensors"] = std::move(subs);
  j["report"] = report_to_json(model.report());
  j["source_digest"] = content_digest(src, ids);
  return j;
}

inline void save_model(std::ostream& out, const CompletionModel& model, const IdMap& ids,
                       const nlohmann::json& config = nlohmann::json::object()) {
  out << model_to_json(model, ids, config).dump() << '\n';
}

inline ModelArtifact load_model(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model artifact is not valid JSON: ") + e.what(), 0);
  }
  try {
    if (j.at("format") != kModelFormat) throw ParseError("not a uctc model artifact", 0);
    if (j.at("version").get<int>() != kModelVersion) {
      throw ParseError("unsupported model version " + j.at("version").dump(), 0);
    }
    const auto extents = j.at("extents").get<Extents>();
    const int k = j.at("k").get<int>();
    const std::size_t d = extents.size();

    IdMap ids(d);
    const auto names = j.at("ids").get<std::vector<std::vector<std::string>>>();
    if (names.size() != d) throw ParseError("id map order mismatch", 0);
    for (std::size_t dim = 0; dim < d; ++dim) {
      for (const auto& n : names[dim]) ids.intern(dim, n);
    }

    std::vector<SparseTensor::Entry> entries;
    for (const auto& row : j.at("entries")) {
      if (row.size() != d + 1) throw ParseError("malformed entry row", 0);
      IndexVector idx(d);
      for (std::size_t m = 0; m < d; ++m) idx[m] = row[m].get<int>();
      entries.emplace_back(std::move(idx), row[d].get<double>());
    }
    SparseTensor source(extents, std::move(entries));

    auto layout = std::make_shared<const SubtensorLayout>(source, k);
    const auto& subs = j.at("subtensors");
    if (subs.size() != layout->size()) throw ParseError("subtensor count does not match source", 0);
    std::vector<double> coeffs(layout->size());
    for (std::size_t i = 0; i < subs.size(); ++i) {
      const SubtensorId id{subs[i].at("fixed_dims").get<std::vector<int>>(),
                           subs[i].at("fixed_coords").get<IndexVector>()};
      if (!(id == layout->id(i))) throw ParseError("subtensor ids do not match source", 0);
      coeffs[i] = subs[i].at("log_coeff").get<double>();
    }

    ConvergenceReport report;
    const auto& r = j.at("report");
    report.sweeps = r.at("sweeps").get<std::size_t>();
    report.converged = r.at("converged").get<bool>();
    report.epsilon = r.at("epsilon").get<double>();
    report.v_trace = r.at("v_trace").get<std::vector<double>>();

    const auto digest = j.at("source_digest").get<std::string>();
    if (digest != content_digest(source, ids)) throw ParseError("source digest mismatch: artifact corrupted", 0);

    return {CompletionModel(std::move(source), ScalingFamily(std::move(layout), std::move(coeffs)), std::move(report)),
            std::move(ids), j.at("config"), digest};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model artifact: ") + e.what(), 0);
  }
}

}  // namespace uctc
