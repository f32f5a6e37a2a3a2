#pragma once

// uctc command-line driver. run_cli() is separate from main() so the tests
// can drive it with in-memory streams.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uctc/uctc.hpp"

namespace uctc::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;

/// Line-delimited output: one JSON object per line, or "record: key=value"
/// lines for people.
class Emitter {
 public:
  Emitter(std::ostream& out, bool structured) : out_(out), structured_(structured) {}

  void operator()(const json& record) const {
    if (structured_) {
      out_ << record.dump() << '\n';
      return;
    }
    out_ << record.value("record", std::string("record")) << ':';
    for (const auto& [key, value] : record.items()) {
      if (key == "record") continue;
      out_ << ' ' << key << '=' << (value.is_string() ? value.get<std::string>() : value.dump());
    }
    out_ << '\n';
  }

  bool structured() const noexcept { return structured_; }

 private:
  std::ostream& out_;
  bool structured_;
};

struct InputFlags {
  std::string path;
  std::string schema = "key,key,value";
  std::string delimiter = ",";
  bool header = false;
  std::string transform;
  std::string dedupe = "none";
};

struct RunFlags {
  std::optional<int> k;
  double epsilon = 1e-12;
  std::size_t max_sweeps = 10000;
  std::uint64_t seed = 1;
  std::string format = "human";
  std::uint64_t max_cells = 10'000'000;
  std::size_t max_oracle_entries = 2000;
};

inline std::string unescape_delimiter(const std::string& d) {
  if (d == "\\t" || d == "tab") return "\t";
  return d;
}

inline ValueTransform parse_transform(const std::string& text) {
  if (text.empty()) return {};
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ArgumentError("--transform expects a,b");
  const auto a = detail::parse_double(text.substr(0, comma));
  const auto b = detail::parse_double(text.substr(comma + 1));
  if (!a || !b) throw ArgumentError("--transform expects two numbers, got '" + text + "'");
  return {*a, *b};
}

inline Schema make_schema(const InputFlags& f) {
  Schema s;
  s.columns = parse_column_roles(f.schema);
  s.delimiter = unescape_delimiter(f.delimiter);
  s.header = f.header;
  s.transform = parse_transform(f.transform);
  s.dedupe = parse_dedupe(f.dedupe);
  s.validate();
  return s;
}

inline RatingData load_ratings(const InputFlags& f) {
  std::ifstream in(f.path);
  if (!in) throw ArgumentError("cannot open '" + f.path + "'");
  return parse_ratings(in, make_schema(f));
}

inline json input_json(const InputFlags& f) {
  return {{"path", f.path}, {"schema", f.schema},     {"delimiter", unescape_delimiter(f.delimiter)},
          {"header", f.header}, {"transform", f.transform.empty() ? "1,0" : f.transform}, {"dedupe", f.dedupe}};
}

inline int resolved_k(const RunFlags& r, std::size_t order) {
  const int k = r.k.value_or(static_cast<int>(order) - 1);
  check_subtensor_order(k, order);
  return k;
}

inline CompletionConfig completion_config(const RunFlags& r) {
  CompletionConfig c;
  c.scaling.epsilon = r.epsilon;
  c.scaling.max_sweeps = r.max_sweeps;
  c.complete_all_cap = r.max_cells;
  return c;
}

inline json config_json(const std::string& command, const RunFlags& r, std::optional<int> k) {
  json j{{"record", "config"},
         {"command", command},
         {"epsilon", r.epsilon},
         {"max_sweeps", r.max_sweeps},
         {"seed", r.seed},
         {"format", r.format},
         {"caps", {{"max_cells", r.max_cells}, {"max_oracle_entries", r.max_oracle_entries}}}};
  j["k"] = k ? json(*k) : json("d-1");
  return j;
}

inline void add_run_flags(CLI::App* app, RunFlags& r, bool scaling) {
  if (scaling) {
    app->add_option("--k", r.k, "Subtensor dimension (default d-1)");
    app->add_option("--epsilon", r.epsilon, "Convergence threshold on the per-sweep update")->capture_default_str();
    app->add_option("--max-sweeps", r.max_sweeps, "Sweep limit")->capture_default_str();
  }
  app->add_option("--seed", r.seed, "Random seed")->capture_default_str();
  app->add_option("--format", r.format, "Output format")
      ->check(CLI::IsMember({"human", "jsonl"}))
      ->capture_default_str();
  app->add_option("--max-cells", r.max_cells, "Largest extent box to enumerate")->capture_default_str();
}

inline void add_input_flags(CLI::App* app, InputFlags& f) {
  app->add_option("ratings", f.path, "Delimited ratings file")->required();
  app->add_option("--schema", f.schema, "Column roles, e.g. key,key,value,skip")->capture_default_str();
  app->add_option("--delimiter", f.delimiter, "Field delimiter (\\t or tab for TSV, :: for MovieLens)")
      ->capture_default_str();
  app->add_flag("--header", f.header, "First line is a header");
  app->add_option("--transform", f.transform, "Affine value transform a,b: v' = a*v + b");
  app->add_option("--dedupe", f.dedupe, "Duplicate policy")
      ->check(CLI::IsMember({"none", "last", "mean-log"}))
      ->capture_default_str();
}

inline json ids_json(const IdMap& ids, std::span<const int> idx) {
  return ids.names_of(idx);
}

// --- complete -------------------------------------------------------------

struct CompleteFlags {
  InputFlags input;
  RunFlags run;
  std::string output;
  std::string canonical_out;
  std::string id_map_out;
};

inline int cmd_complete(const CompleteFlags& f, std::ostream& out) {
  const Emitter emit(out, f.run.format == "jsonl");
  const auto data = load_ratings(f.input);
  const int k = resolved_k(f.run, data.tensor.order());
  auto config = config_json("complete", f.run, k);
  config["input"] = input_json(f.input);
  config["output"] = f.output;
  emit(config);
  emit({{"record", "input"},
        {"order", data.tensor.order()},
        {"extents", data.tensor.extents()},
        {"known", data.tensor.nnz()},
        {"records", data.records},
        {"digest", content_digest(data.tensor, data.ids)}});

  if (!f.canonical_out.empty()) {
    std::ofstream o(f.canonical_out);
    write_ratings(o, data.tensor, data.ids);
  }
  if (!f.id_map_out.empty()) {
    std::ofstream o(f.id_map_out);
    write_id_map(o, data.ids);
  }

  try {
    const auto model = tca(data.tensor, k, completion_config(f.run));
    std::ofstream o(f.output);
    if (!o) throw ArgumentError("cannot write '" + f.output + "'");
    config.erase("record");
    save_model(o, model, data.ids, config);
    auto report = report_to_json(model.report());
    report["record"] = "convergence";
    emit(report);
    return kExitOk;
  } catch (const NonConvergenceError& e) {
    auto report = report_to_json(e.report());
    report["record"] = "convergence";
    emit(report);
    emit({{"record", "error"}, {"kind", "non_convergence"}, {"message", e.what()}});
    return kExitFailure;
  }
}

// --- predict --------------------------------------------------------------

struct PredictFlags {
  std::string model;
  std::vector<std::string> queries;
  std::string query_delimiter = ",";
  bool all = false;
  std::string round;
  std::size_t top = 0;
  std::string top_slice;
  RunFlags run;
};

inline std::optional<RatingScale> parse_scale(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::vector<double> parts;
  for (auto p : detail::split(text, ",")) {
    auto v = detail::parse_double(p);
    if (!v) throw ArgumentError("--round expects min,max,step");
    parts.push_back(*v);
  }
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[0] > parts[1]) {
    throw ArgumentError("--round expects min,max,step with step > 0");
  }
  return RatingScale{parts[0], parts[1], parts[2]};
}

inline int cmd_predict(const PredictFlags& f, std::ostream& out) {
  const Emitter emit(out, f.run.format == "jsonl");
  std::ifstream in(f.model);
  if (!in) throw ArgumentError("cannot open model '" + f.model + "'");
  const auto artifact = load_model(in);
  const auto& model = artifact.model;
  const auto scale = parse_scale(f.round);

  auto config = config_json("predict", f.run, model.k());
  config["model"] = f.model;
  config["model_config"] = artifact.config;
  config["round"] = f.round;
  emit(config);

  const SupportFinder finder(model.source());
  const auto record = [&](const IndexVector& idx) {
    const double raw = model.predict(idx);
    json r{{"record", "prediction"},
           {"ids", ids_json(artifact.ids, idx)},
           {"coords", idx},
           {"raw", raw},
           {"known", model.is_known(idx)},
           {"supported", finder.supported(idx)}};
    if (scale) r["rating"] = scale->apply(raw);
    return r;
  };

  std::size_t ok = 0, failed = 0;
  for (const auto& q : f.queries) {
    try {
      std::vector<std::string> parts;
      for (auto p : detail::split(q, f.query_delimiter)) parts.emplace_back(detail::trim(p));
      emit(record(artifact.ids.resolve(parts)));
      ++ok;
    } catch (const std::exception& e) {
      emit({{"record", "error"}, {"query", q}, {"message", e.what()}});
      ++failed;
    }
  }

  if (f.all) {
    const auto& ext = model.source().extents();
    const auto cells = box_size(ext);
    if (cells > f.run.max_cells) {
      throw CapacityError("extent box has " + std::to_string(cells) + " cells, cap is " +
                          std::to_string(f.run.max_cells));
    }
    IndexVector idx(ext.size(), 1);
    do {
      emit(record(idx));
      ++ok;
    } while (advance_index(idx, ext));
  }

  if (f.top > 0) {
    const auto colon = f.top_slice.find(':');
    if (colon == std::string::npos) throw ArgumentError("--slice expects dim:id (dim is 1-based)");
    const int dim1 = std::stoi(f.top_slice.substr(0, colon));
    if (dim1 < 1 || static_cast<std::size_t>(dim1) > model.order()) throw ArgumentError("--slice dimension out of range");
    const auto dim = static_cast<std::size_t>(dim1 - 1);
    const auto coord = artifact.ids.find(dim, f.top_slice.substr(colon + 1));
    if (!coord) throw LookupError("unknown id '" + f.top_slice.substr(colon + 1) + "'");
    std::vector<RankedPrediction> items;
    for (const auto& idx : top_n_missing(model, dim, *coord, std::numeric_limits<std::size_t>::max())) {
      const double raw = model.predict(idx);
      items.push_back({idx, raw, scale ? scale->apply(raw) : raw});
    }
    rank_predictions(items);
    for (std::size_t i = 0; i < items.size() && i < f.top; ++i) {
      auto r = record(items[i].idx);
      r["record"] = "recommendation";
      r["rank"] = i + 1;
      emit(r);
      ++ok;
    }
  }

  emit({{"record", "summary"}, {"succeeded", ok}, {"failed", failed}});
  if (ok == 0 && failed > 0) return kExitInput;
  return kExitOk;
}

// --- verify ---------------------------------------------------------------

inline const std::vector<std::string>& all_properties() {
  static const std::vector<std::string> names{"known_entries",      "canonical_form",   "unit_consistency",
                                              "consensus_ordering", "scale_fairness",   "gauge_uniqueness",
                                              "oracle_equivalence"};
  return names;
}

struct VerifyFlags {
  InputFlags input;
  RunFlags run;
  std::vector<std::string> properties;
  std::vector<std::string> orderings;
  std::vector<std::string> relaxed_orderings;
  std::size_t trials = 20;
  std::size_t sweep_orders = 5;
  std::string fair_slice;
  double factor = 1.25;
};

/// "dim:id1,id2,..." with a 1-based dim, ids listed lowest first. Returns
/// the 0-based dim and the slice coordinates.
inline std::pair<std::size_t, std::vector<int>> parse_ordering_slices(const std::string& text,
                                                                      const RatingData& data) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw SpecificationError("ordering '" + text + "' must look like dim:id1,id2,...",
                             SpecificationError::Clause::kMalformed);
  }
  int dim1 = 0;
  try {
    dim1 = std::stoi(text.substr(0, colon));
  } catch (const std::exception&) {
    throw SpecificationError("ordering dimension is not a number", SpecificationError::Clause::kMalformed);
  }
  if (dim1 < 1 || static_cast<std::size_t>(dim1) > data.tensor.order()) {
    throw SpecificationError("ordering dimension out of range", SpecificationError::Clause::kMalformed);
  }
  const auto dim = static_cast<std::size_t>(dim1 - 1);
  std::vector<int> gamma;
  for (auto id : detail::split(std::string_view(text).substr(colon + 1), ",")) {
    const auto c = data.ids.find(dim, std::string(detail::trim(id)));
    if (!c) {
      throw SpecificationError("ordering names unknown id '" + std::string(id) + "'",
                               SpecificationError::Clause::kMalformed);
    }
    gamma.push_back(*c);
  }
  return {dim, std::move(gamma)};
}

inline OrderingSpec parse_ordering(const std::string& text, const RatingData& data) {
  auto [dim, gamma] = parse_ordering_slices(text, data);
  return make_ordering_spec(data.tensor, dim, std::move(gamma));
}

inline int cmd_verify(const VerifyFlags& f, std::ostream& out, std::ostream& err) {
  const Emitter emit(out, f.run.format == "jsonl");
  const auto data = load_ratings(f.input);
  const auto& tensor = data.tensor;
  const int k = resolved_k(f.run, tensor.order());
  const auto config = completion_config(f.run);
  auto props = f.properties.empty() ? all_properties() : f.properties;

  // Declared orderings are validated before anything runs: a bad spec is an
  // input error, not a property failure.
  std::vector<OrderingSpec> declared;
  for (const auto& o : f.orderings) declared.push_back(parse_ordering(o, data));
  std::vector<std::pair<std::size_t, std::vector<int>>> relaxed;
  for (const auto& o : f.relaxed_orderings) relaxed.push_back(parse_ordering_slices(o, data));

  auto cfg = config_json("verify", f.run, k);
  cfg["input"] = input_json(f.input);
  cfg["properties"] = props;
  cfg["orderings"] = f.orderings;
  cfg["relaxed_orderings"] = f.relaxed_orderings;
  cfg["trials"] = f.trials;
  cfg["sweep_orders"] = f.sweep_orders;
  cfg["factor"] = f.factor;
  cfg["fair_slice"] = f.fair_slice;
  emit(cfg);

  bool failed = false;
  const auto report = [&](PropertyReport r) {
    failed = failed || !r.pass;
    emit(to_json(r));
  };
  const auto warn = [&](const std::string& property, const std::string& message) {
    err << "warning: " << property << ": " << message << '\n';
    emit({{"record", "skipped"}, {"property", property}, {"reason", message}});
  };

  std::optional<CompletionModel> model;
  const auto get_model = [&]() -> const CompletionModel& {
    if (!model) model.emplace(tca(tensor, k, config));
    return *model;
  };

  for (const auto& p : props) {
    try {
      if (p == "known_entries") {
        report(check_known_entries(get_model()));
      } else if (p == "canonical_form") {
        report(check_canonical_form(tensor, k, config));
      } else if (p == "unit_consistency") {
        report(check_unit_consistency(tensor, k, f.trials, 1e-6, f.run.seed, config));
      } else if (p == "consensus_ordering") {
        auto specs = declared;
        if (specs.empty() && tensor.order() == 2) {
          for (std::size_t dim = 0; dim < tensor.order(); ++dim) {
            for (auto& s : find_consensus_sets(tensor, dim)) specs.push_back(std::move(s));
          }
        }
        PropertyReport combined;
        combined.property = "consensus_ordering";
        combined.notes.push_back(std::to_string(specs.size()) + (declared.empty() ? " discovered" : " declared") +
                                 " ordering set(s)");
        for (const auto& s : specs) {
          const auto r = check_consensus_ordering(get_model(), s, f.run.max_cells);
          combined.instances += r.instances;
          combined.violation_count += r.violation_count;
          for (const auto& v : r.violations) {
            if (combined.violations.size() < 20) combined.violations.push_back(v);
          }
        }
        report(combined.finalize());
        for (const auto& [dim, gamma] : relaxed) {
          report(check_consensus_ordering_relaxed(get_model(), dim, gamma, f.run.max_cells));
        }
      } else if (p == "scale_fairness") {
        std::size_t dim = 0;
        int slice = 0;
        if (!f.fair_slice.empty()) {
          const auto colon = f.fair_slice.find(':');
          if (colon == std::string::npos) throw ArgumentError("--fair-slice expects dim:id");
          dim = static_cast<std::size_t>(std::stoi(f.fair_slice.substr(0, colon)) - 1);
          if (dim >= tensor.order()) throw ArgumentError("--fair-slice dimension out of range");
          const auto c = data.ids.find(dim, f.fair_slice.substr(colon + 1));
          if (!c) throw LookupError("unknown id in --fair-slice");
          slice = *c;
        } else {
          const auto counts = tensor.slice_counts(0);
          for (std::size_t j = 0; j < counts.size() && slice == 0; ++j) {
            if (counts[j] > 0) slice = static_cast<int>(j) + 1;
          }
        }
        if (k != static_cast<int>(tensor.order()) - 1) {
          warn(p, "scale fairness is defined for k = d-1");
          continue;
        }
        report(check_scale_fairness(tensor, dim, slice, f.factor, config));
      } else if (p == "gauge_uniqueness") {
        report(check_gauge_uniqueness(tensor, k, f.sweep_orders, f.run.seed, config));
      } else if (p == "oracle_equivalence") {
        OracleLimits limits;
        limits.max_entries = f.run.max_oracle_entries;
        limits.max_rows = f.run.max_oracle_entries;
        report(check_oracle_equivalence(tensor, k, config, 1e-8, 1e-6, limits));
      } else {
        throw ArgumentError("unknown property '" + p + "'");
      }
    } catch (const CapacityError& e) {
      warn(p, e.what());
    } catch (const NonConvergenceError& e) {
      emit({{"record", "error"}, {"property", p}, {"kind", "non_convergence"}, {"message", e.what()}});
      failed = true;
    }
  }
  return failed ? kExitFailure : kExitOk;
}

// --- experiment -----------------------------------------------------------

struct ExperimentFlags {
  std::string name;
  RunFlags run;
  std::string data_path;
  int users = 0;
  int products = 0;
  double factor = 1.25;
  std::size_t base_entries = 20000;
  int doublings = 5;
  double max_ratio = 2.5;
};

/// Plot-ready rows: CSV to `--data` when given, and as records on stdout.
class DataSink {
 public:
  DataSink(const Emitter& emit, const std::string& path, std::string series, std::vector<std::string> columns)
      : emit_(emit), series_(std::move(series)), columns_(std::move(columns)) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw ArgumentError("cannot write '" + path + "'");
      for (std::size_t i = 0; i < columns_.size(); ++i) file_ << (i ? "," : "") << columns_[i];
      file_ << '\n';
    }
  }

  void row(const std::vector<double>& values) {
    json r{{"record", "data"}, {"series", series_}};
    for (std::size_t i = 0; i < columns_.size(); ++i) r[columns_[i]] = values[i];
    emit_(r);
    if (file_.is_open()) {
      for (std::size_t i = 0; i < values.size(); ++i) file_ << (i ? "," : "") << format_value(values[i]);
      file_ << '\n';
    }
  }

 private:
  const Emitter& emit_;
  std::string series_;
  std::vector<std::string> columns_;
  std::ofstream file_;
};

inline int cmd_experiment(const ExperimentFlags& f, std::ostream& out) {
  const Emitter emit(out, f.run.format == "jsonl");
  auto cfg = config_json("experiment", f.run, std::nullopt);
  cfg["experiment"] = f.name;
  const auto config = completion_config(f.run);

  if (f.name == "consensus") {
    ConsensusParams p;
    if (f.users > 0) p.users = f.users;
    if (f.products > 0) p.base_products = f.products;
    p.seed = f.run.seed;
    p.config = config;
    cfg["users"] = p.users;
    cfg["base_products"] = p.base_products;
    cfg["rating_probability"] = p.rating_probability;
    emit(cfg);
    const auto r = run_consensus_experiment(p);
    DataSink sink(emit, f.data_path, "consensus", {"user", "x", "y", "z"});
    for (const auto& row : r.rows) sink.row({row[0], row[1], row[2], row[3]});
    emit({{"record", "result"},
          {"experiment", "consensus"},
          {"violations", r.violations},
          {"control_users", r.control_users},
          {"recovered_planted", r.recovered_planted},
          {"pass", r.violations == 0}});
    return r.violations == 0 ? kExitOk : kExitFailure;
  }
  if (f.name == "fairness") {
    FairnessParams p;
    if (f.users > 0) p.users = f.users;
    if (f.products > 0) p.products = f.products;
    p.factor = f.factor;
    p.seed = f.run.seed;
    p.config = config;
    cfg["users"] = p.users;
    cfg["products"] = p.products;
    cfg["factor"] = p.factor;
    cfg["top_n"] = p.top_n;
    emit(cfg);
    const auto r = run_fairness_experiment(p);
    // Per other-user maximum relative change, for plotting.
    const auto before = tca(r.tensor, 1, config);
    SubtensorScaling scaling(1);
    scaling.set({{0}, {p.user}}, std::log(p.factor));
    const auto after = tca(scaling.apply(r.tensor), 1, config);
    DataSink sink(emit, f.data_path, "fairness", {"user", "max_relative_change"});
    for (int u = 1; u <= p.users; ++u) {
      if (u == p.user) continue;
      double worst = 0.0;
      for (int j = 1; j <= p.products; ++j) {
        const IndexVector idx{u, j};
        if (before.is_known(idx)) continue;
        worst = std::max(worst, std::abs(after.predict(idx) / before.predict(idx) - 1.0));
      }
      sink.row({static_cast<double>(u), worst});
    }
    emit(to_json(r.report));
    emit({{"record", "result"},
          {"experiment", "fairness"},
          {"changed_predictions", r.changed_predictions},
          {"changed_top_lists", r.changed_top_lists},
          {"pass", r.report.pass}});
    return r.report.pass ? kExitOk : kExitFailure;
  }
  if (f.name == "scaling") {
    ScalingParams p;
    p.base_entries = f.base_entries;
    p.doublings = f.doublings;
    p.seed = f.run.seed;
    p.config = config;
    cfg["base_entries"] = p.base_entries;
    cfg["doublings"] = p.doublings;
    cfg["density"] = p.density;
    cfg["max_ratio"] = f.max_ratio;
    emit(cfg);
    const auto r = run_scaling_experiment(p);
    DataSink sink(emit, f.data_path, "scaling",
                  {"entries", "extent", "sweeps", "converged", "seconds_per_sweep", "ratio"});
    for (const auto& row : r.rows) {
      sink.row({static_cast<double>(row.entries), static_cast<double>(row.extents[0]),
                static_cast<double>(row.sweeps_to_converge), row.converged ? 1.0 : 0.0, row.seconds_per_sweep,
                row.ratio_to_previous});
    }
    const bool pass = r.max_ratio <= f.max_ratio && r.lookups_per_query == 2;
    emit({{"record", "result"},
          {"experiment", "scaling"},
          {"max_ratio", r.max_ratio},
          {"lookups_per_query", r.lookups_per_query},
          {"pass", pass}});
    return pass ? kExitOk : kExitFailure;
  }
  throw ArgumentError("unknown experiment '" + f.name + "'");
}

// --- entry point ----------------------------------------------------------

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unit-consistent completion of sparse positive tensors", "uctc"};
  app.require_subcommand(1);

  CompleteFlags complete;
  auto* c = app.add_subcommand("complete", "Fit a model and write the artifact");
  add_input_flags(c, complete.input);
  add_run_flags(c, complete.run, true);
  c->add_option("-o,--output", complete.output, "Model artifact path")->required();
  c->add_option("--canonical-out", complete.canonical_out, "Write the parsed ratings as canonical CSV");
  c->add_option("--id-map-out", complete.id_map_out, "Write the id map sidecar");

  PredictFlags predict;
  auto* p = app.add_subcommand("predict", "Predict cells from a model artifact");
  p->add_option("model", predict.model, "Model artifact")->required();
  p->add_option("-q,--query", predict.queries, "Id tuple, e.g. u2,p2 (repeatable)");
  p->add_option("--query-delimiter", predict.query_delimiter, "Separator inside --query")->capture_default_str();
  p->add_flag("--all", predict.all, "Predict every cell of the extent box");
  p->add_option("--round", predict.round, "Round to a rating scale min,max,step");
  p->add_option("--top", predict.top, "Top-N missing cells of --slice");
  p->add_option("--slice", predict.top_slice, "dim:id slice for --top (dim is 1-based)");
  add_run_flags(p, predict.run, false);

  VerifyFlags verify;
  auto* v = app.add_subcommand("verify", "Check completion properties on a ratings file");
  add_input_flags(v, verify.input);
  add_run_flags(v, verify.run, true);
  v->add_option("--properties", verify.properties, "Properties to run (default all)")
      ->delimiter(',')
      ->check(CLI::IsMember(all_properties()));
  v->add_option("--ordering", verify.orderings, "Declared ordering dim:id1,id2,... lowest first (repeatable)");
  v->add_option("--relaxed-ordering", verify.relaxed_orderings,
                 "Ordering over slices with differing supports, checked pairwise; informational (repeatable)");
  v->add_option("--trials", verify.trials, "Unit-consistency trials")->capture_default_str();
  v->add_option("--sweep-orders", verify.sweep_orders, "Gauge-uniqueness sweep orders")->capture_default_str();
  v->add_option("--fair-slice", verify.fair_slice, "dim:id slice to rescale (default first user)");
  v->add_option("--factor", verify.factor, "Scale-fairness factor")->capture_default_str();
  v->add_option("--max-oracle-entries", verify.run.max_oracle_entries, "Oracle cap")->capture_default_str();

  ExperimentFlags experiment;
  auto* e = app.add_subcommand("experiment", "Run a synthetic experiment");
  e->add_option("name", experiment.name, "consensus | fairness | scaling")
      ->required()
      ->check(CLI::IsMember({"consensus", "fairness", "scaling"}));
  add_run_flags(e, experiment.run, false);
  e->add_option("--epsilon", experiment.run.epsilon, "Convergence threshold")->capture_default_str();
  e->add_option("--max-sweeps", experiment.run.max_sweeps, "Sweep limit")->capture_default_str();
  e->add_option("--data", experiment.data_path, "Write plot-ready CSV here");
  e->add_option("--users", experiment.users, "Users (consensus, fairness)");
  e->add_option("--products", experiment.products, "Products (consensus: base products)");
  e->add_option("--factor", experiment.factor, "Fairness factor")->capture_default_str();
  e->add_option("--base-entries", experiment.base_entries, "Scaling: first size")->capture_default_str();
  e->add_option("--doublings", experiment.doublings, "Scaling: number of doublings")->capture_default_str();
  e->add_option("--max-ratio", experiment.max_ratio, "Scaling: allowed time ratio per doubling")
      ->capture_default_str();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  const auto error = [&](const std::string& kind, const std::string& message, std::optional<std::size_t> line) {
    json r{{"record", "error"}, {"kind", kind}, {"message", message}};
    if (line) r["line"] = *line;
    err << "error: " << message << '\n';
    bool structured = false;
    for (const auto* flags : {&complete.run, &predict.run, &verify.run, &experiment.run}) {
      structured = structured || flags->format == "jsonl";
    }
    Emitter(out, structured)(r);
  };

  try {
    if (c->parsed()) return cmd_complete(complete, out);
    if (p->parsed()) return cmd_predict(predict, out);
    if (v->parsed()) return cmd_verify(verify, out, err);
    return cmd_experiment(experiment, out);
  } catch (const SpecificationError& ex) {
    error("specification", ex.what(), std::nullopt);
  } catch (const RecordError& ex) {
    error("record", ex.what(), ex.line());
  } catch (const ParseError& ex) {
    error("parse", ex.what(), ex.line());
  } catch (const DuplicateError& ex) {
    error("duplicate", ex.what(), ex.line());
  } catch (const CapacityError& ex) {
    error("capacity", ex.what(), std::nullopt);
  } catch (const std::exception& ex) {
    error("input", ex.what(), std::nullopt);
  }
  return kExitInput;
}

}  // namespace uctc::cli
