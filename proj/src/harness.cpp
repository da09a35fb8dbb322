#include "aisetraj/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "aisetraj/baselines.hpp"
#include "aisetraj/frenet.hpp"
#include "aisetraj/text.hpp"

#ifndef AISETRAJ_VERSION
#define AISETRAJ_VERSION "unknown"
#endif

namespace aisetraj {

namespace {

using nlohmann::json;

bool has_method(const ExperimentConfig& c, Method m) {
  for (Method x : c.methods) {
    if (x == m) return true;
  }
  return false;
}

bool wants_aise(const ExperimentConfig& c) {
  return has_method(c, Method::AiseVa) || has_method(c, Method::AiseFs);
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("unknown " + where + " field: " + key);
  }
}

}  // namespace

std::string scenario_name(ScenarioKind s) {
  switch (s) {
    case ScenarioKind::Parabolic: return "parabolic";
    case ScenarioKind::Helical: return "helical";
    case ScenarioKind::Csv: return "csv";
  }
  return "?";
}

ScenarioKind parse_scenario(const std::string& s) {
  if (s == "parabolic") return ScenarioKind::Parabolic;
  if (s == "helical") return ScenarioKind::Helical;
  if (s == "csv") return ScenarioKind::Csv;
  throw std::invalid_argument("unknown scenario: " + s);
}

std::string rmse_form_name(RmseForm f) {
  return f == RmseForm::Standard ? "standard" : "literal";
}

RmseForm parse_rmse_form(const std::string& s) {
  if (s == "standard") return RmseForm::Standard;
  if (s == "literal") return RmseForm::Literal;
  throw std::invalid_argument("unknown RMSE form: " + s);
}

double ExperimentConfig::effective_sigma() const {
  if (sigma) return *sigma;
  switch (scenario) {
    case ScenarioKind::Parabolic: return 1.0;
    case ScenarioKind::Helical: return 0.1;
    case ScenarioKind::Csv: return 0.0;
  }
  return 0.0;
}

void ExperimentConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (k0 < 0) throw std::invalid_argument("k0 must be >= 0");
  if (scenario != ScenarioKind::Csv && k0 + horizon >= n_steps) {
    throw std::invalid_argument("need k0 + horizon < n_steps");
  }
  if (scenario == ScenarioKind::Csv && csv_path.empty()) {
    throw std::invalid_argument("csv scenario needs a csv_path");
  }
  if (scenario == ScenarioKind::Csv && truth_derivatives) {
    throw std::invalid_argument("CSV input has no truth derivatives");
  }
  if (effective_sigma() < 0.0) {
    throw std::invalid_argument("sigma must be nonnegative");
  }
  if (methods.empty()) throw std::invalid_argument("no methods selected");
  if (!(sample_time > 0.0)) {
    throw std::invalid_argument("sample_time must be positive");
  }
  for (int i = 0; i < 3; ++i) {
    aise[i].validate();
    if (aise[i].order != i + 1) {
      throw std::invalid_argument("AISE block order" + std::to_string(i + 1) +
                                  " has a different order field");
    }
    if (aise[i].sample_time != sample_time) {
      throw std::invalid_argument("AISE sample_time differs from experiment");
    }
  }
  ButterworthCascade(butterworth.order, butterworth.cutoff);
  if (!(tracking_index > 0.0)) {
    throw std::invalid_argument("tracking_index must be positive");
  }
}

void to_json(json& j, const ExperimentConfig& c) {
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(std::string(method_name(m)));
  j = json{{"schema_version", kConfigSchemaVersion},
           {"scenario", scenario_name(c.scenario)},
           {"csv_path", c.csv_path},
           {"n_steps", c.n_steps},
           {"k0", c.k0},
           {"horizon", c.horizon},
           {"sigma", c.sigma ? json(*c.sigma) : json(nullptr)},
           {"seed", c.seed},
           {"methods", methods},
           {"rmse_form", rmse_form_name(c.rmse_form)},
           {"truth_derivatives", c.truth_derivatives},
           {"anchor_on_estimate", c.anchor_on_estimate},
           {"full_predictions", c.full_predictions},
           {"sample_time", c.sample_time},
           {"aise",
            {{"order1", c.aise[0]}, {"order2", c.aise[1]}, {"order3", c.aise[2]}}},
           {"butterworth",
            {{"order", c.butterworth.order}, {"cutoff", c.butterworth.cutoff}}},
           {"tracking_index", c.tracking_index}};
}

void from_json(const json& j, ExperimentConfig& c) {
  reject_unknown(j,
                 {"schema_version", "scenario", "csv_path", "n_steps", "k0",
                  "horizon", "sigma", "seed", "methods", "rmse_form",
                  "truth_derivatives", "anchor_on_estimate",
                  "full_predictions", "sample_time", "aise", "butterworth",
                  "tracking_index"},
                 "experiment config");
  if (j.contains("schema_version") &&
      j.at("schema_version").get<int>() != kConfigSchemaVersion) {
    throw std::invalid_argument("unsupported config schema_version");
  }
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  if (j.contains("scenario")) {
    c.scenario = parse_scenario(j.at("scenario").get<std::string>());
  }
  get("csv_path", c.csv_path);
  get("n_steps", c.n_steps);
  get("k0", c.k0);
  get("horizon", c.horizon);
  if (j.contains("sigma")) {
    const auto& s = j.at("sigma");
    c.sigma = s.is_null() ? std::nullopt : std::optional<double>(s.get<double>());
  }
  get("seed", c.seed);
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) {
      c.methods.push_back(parse_method(m.get<std::string>()));
    }
  }
  if (j.contains("rmse_form")) {
    c.rmse_form = parse_rmse_form(j.at("rmse_form").get<std::string>());
  }
  get("truth_derivatives", c.truth_derivatives);
  get("anchor_on_estimate", c.anchor_on_estimate);
  get("full_predictions", c.full_predictions);
  if (j.contains("sample_time")) {
    j.at("sample_time").get_to(c.sample_time);
    for (auto& a : c.aise) a.sample_time = c.sample_time;
  }
  if (j.contains("aise")) {
    const auto& blocks = j.at("aise");
    reject_unknown(blocks, {"order1", "order2", "order3"}, "aise");
    const char* names[] = {"order1", "order2", "order3"};
    for (int i = 0; i < 3; ++i) {
      if (blocks.contains(names[i])) from_json(blocks.at(names[i]), c.aise[i]);
    }
  }
  if (j.contains("butterworth")) {
    const auto& b = j.at("butterworth");
    reject_unknown(b, {"order", "cutoff"}, "butterworth");
    if (b.contains("order")) b.at("order").get_to(c.butterworth.order);
    if (b.contains("cutoff")) b.at("cutoff").get_to(c.butterworth.cutoff);
  }
  get("tracking_index", c.tracking_index);
}

std::int64_t n_tilde(std::int64_t n, int horizon, std::int64_t k0) {
  return n - horizon - (k0 - 1);
}

Eigen::Vector3d rmse(std::span<const Eigen::Vector3d> truth,
                     std::span<const PredictionTrace> traces, int horizon,
                     std::int64_t k0, std::int64_t n, RmseForm form) {
  const std::int64_t count = n_tilde(n, horizon, k0);
  if (count <= 0) throw std::invalid_argument("no anchors in RMSE window");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (std::int64_t k = k0; k <= n - horizon; ++k) {
    const auto idx = static_cast<std::size_t>(k - k0);
    if (idx >= traces.size() || traces[idx].anchor != k ||
        static_cast<int>(traces[idx].positions.size()) < horizon) {
      throw std::invalid_argument("missing prediction trace for anchor " +
                                  std::to_string(k));
    }
    const Eigen::Vector3d e =
        truth[static_cast<std::size_t>(k + horizon)] -
        traces[idx].positions[static_cast<std::size_t>(horizon - 1)];
    sum += e.cwiseProduct(e);
  }
  const double m = static_cast<double>(count);
  if (form == RmseForm::Standard) return (sum / m).cwiseSqrt();
  return sum.cwiseSqrt() / m;
}

const MethodResult* RmseReport::find(Method m) const {
  for (const auto& r : methods) {
    if (r.method == m) return &r;
  }
  return nullptr;
}

namespace {

struct AxisEstimates {
  std::vector<double> aise_v, aise_a, aise_j, aise_pos;
  std::vector<double> bdb_v, bdb_a, bdb_j, bdb_pos;
  std::vector<double> abg_p, abg_v, abg_a;
  std::vector<std::string> violations;
};

AxisEstimates run_axis(const ExperimentConfig& c,
                       const std::array<AiseConfig, 3>& aise_cfg, double ts,
                       const std::vector<double>& y, int axis) {
  AxisEstimates out;
  const std::size_t n = y.size();
  if (wants_aise(c)) {
    for (auto* v : {&out.aise_v, &out.aise_a, &out.aise_j, &out.aise_pos}) {
      v->resize(n);
    }
    std::vector<AiseEstimator> est;
    for (const auto& cfg : aise_cfg) est.emplace_back(cfg);
    std::vector<double>* dst[] = {&out.aise_v, &out.aise_a, &out.aise_j};
    for (int o = 0; o < 3; ++o) {
      std::size_t k = 0;
      try {
        for (; k < n; ++k) {
          (*dst[o])[k] = est[o].step(y[k]);
          if (o == 0) out.aise_pos[k] = est[o].state().x_da(0);
        }
      } catch (const AiseError& e) {
        // The channel is dead from here on; later estimates are NaN.
        out.violations.push_back(std::string("axis ") + "xyz"[axis] +
                                 " order " + std::to_string(o + 1) + ": " +
                                 e.what());
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (; k < n; ++k) {
          (*dst[o])[k] = nan;
          if (o == 0) out.aise_pos[k] = nan;
        }
      }
    }
  }
  if (has_method(c, Method::BdbVa)) {
    BdbDifferentiator bdb(c.butterworth.order, c.butterworth.cutoff, ts);
    for (auto* v : {&out.bdb_v, &out.bdb_a, &out.bdb_j, &out.bdb_pos}) {
      v->resize(n);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const DerivativeTriple d = bdb.step(y[k]);
      out.bdb_v[k] = d.v;
      out.bdb_a[k] = d.a;
      out.bdb_j[k] = d.j;
      out.bdb_pos[k] = bdb.filtered();
    }
  }
  if (has_method(c, Method::AbgVa)) {
    AbgFilter abg(c.tracking_index, ts);
    for (auto* v : {&out.abg_p, &out.abg_v, &out.abg_a}) v->resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::Vector3d x = abg.step(y[k]);
      out.abg_p[k] = x(0);
      out.abg_v[k] = x(1);
      out.abg_a[k] = x(2);
    }
  }
  return out;
}

std::vector<Eigen::Vector3d> gather(const std::array<AxisEstimates, 3>& ax,
                                    std::vector<double> AxisEstimates::*field) {
  const std::size_t n = (ax[0].*field).size();
  std::vector<Eigen::Vector3d> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = Eigen::Vector3d((ax[0].*field)[k], (ax[1].*field)[k],
                             (ax[2].*field)[k]);
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.sigma = config.effective_sigma();

  std::vector<TruthSample> truth;
  std::vector<Eigen::Vector3d> truth_p;
  int noisy_axes = 3;
  if (config.scenario == ScenarioKind::Csv) {
    const PositionSeries series = read_position_csv(config.csv_path);
    res.sample_time = series.sample_time;
    truth_p = series.p;
  } else {
    res.sample_time = config.sample_time;
    const bool para = config.scenario == ScenarioKind::Parabolic;
    // The parabola lies in the z = 0 plane; its z channel stays noise free.
    noisy_axes = para ? 2 : 3;
    for (std::int64_t k = 0; k <= config.n_steps; ++k) {
      truth.push_back(para ? parabolic(k, res.sample_time)
                           : helical(k, res.sample_time));
      truth_p.push_back(truth.back().p);
    }
  }
  res.n = static_cast<std::int64_t>(truth_p.size()) - 1;
  if (config.k0 + config.horizon > res.n) {
    throw std::invalid_argument("input too short for k0 + horizon");
  }
  const double ts = res.sample_time;

  GaussianNoise noise(config.seed);
  res.truth = truth_p;
  res.measured.reserve(truth_p.size());
  for (const auto& p : truth_p) {
    res.measured.push_back(add_noise(p, res.sigma, noise, noisy_axes));
  }

  std::array<AiseConfig, 3> aise_cfg = config.aise;
  for (auto& a : aise_cfg) a.sample_time = ts;

  EstimateSeries& es = res.estimates;
  if (config.truth_derivatives) {
    for (const auto& s : truth) {
      es.aise_v.push_back(s.v);
      es.aise_a.push_back(s.a);
      es.aise_j.push_back(s.j);
      es.aise_pos.push_back(s.p);
    }
    if (has_method(config, Method::BdbVa)) {
      es.bdb_v = es.aise_v;
      es.bdb_a = es.aise_a;
      es.bdb_j = es.aise_j;
      es.bdb_pos = es.aise_pos;
    }
    if (has_method(config, Method::AbgVa)) {
      es.abg_v = es.aise_v;
      es.abg_a = es.aise_a;
      es.abg_pos = es.aise_pos;
    }
    if (!wants_aise(config)) {
      es.aise_v.clear();
      es.aise_a.clear();
      es.aise_j.clear();
      es.aise_pos.clear();
    }
  } else {
    // Axes are independent channels; each task owns its estimators.
    std::array<std::future<AxisEstimates>, 3> jobs;
    for (int axis = 0; axis < 3; ++axis) {
      std::vector<double> y(res.measured.size());
      for (std::size_t k = 0; k < y.size(); ++k) y[k] = res.measured[k](axis);
      jobs[axis] = std::async(std::launch::async, run_axis, std::cref(config),
                              aise_cfg, ts, std::move(y), axis);
    }
    std::array<AxisEstimates, 3> ax;
    for (int axis = 0; axis < 3; ++axis) {
      ax[axis] = jobs[axis].get();
      for (auto& v : ax[axis].violations) {
        res.invariant_violations.push_back(std::move(v));
      }
    }
    es.aise_v = gather(ax, &AxisEstimates::aise_v);
    es.aise_a = gather(ax, &AxisEstimates::aise_a);
    es.aise_j = gather(ax, &AxisEstimates::aise_j);
    es.aise_pos = gather(ax, &AxisEstimates::aise_pos);
    es.bdb_v = gather(ax, &AxisEstimates::bdb_v);
    es.bdb_a = gather(ax, &AxisEstimates::bdb_a);
    es.bdb_j = gather(ax, &AxisEstimates::bdb_j);
    es.bdb_pos = gather(ax, &AxisEstimates::bdb_pos);
    es.abg_v = gather(ax, &AxisEstimates::abg_v);
    es.abg_a = gather(ax, &AxisEstimates::abg_a);
    es.abg_pos = gather(ax, &AxisEstimates::abg_p);
  }

  res.report.n_tilde = n_tilde(res.n, config.horizon, config.k0);
  for (Method m : config.methods) {
    std::vector<PredictionTrace> traces;
    traces.reserve(static_cast<std::size_t>(res.report.n_tilde));
    MethodResult mr;
    mr.method = m;
    for (std::int64_t k = config.k0; k <= res.n - config.horizon; ++k) {
      const auto i = static_cast<std::size_t>(k);
      DerivativeEstimate est;
      Eigen::Vector3d anchor = res.measured[i];
      switch (m) {
        case Method::AiseVa:
        case Method::AiseFs:
          est.v = es.aise_v[i];
          est.a = es.aise_a[i];
          est.j = es.aise_j[i];
          if (config.anchor_on_estimate) anchor = es.aise_pos[i];
          break;
        case Method::BdbVa:
          est.v = es.bdb_v[i];
          est.a = es.bdb_a[i];
          if (config.anchor_on_estimate) anchor = es.bdb_pos[i];
          break;
        case Method::AbgVa:
          est.v = es.abg_v[i];
          est.a = es.abg_a[i];
          if (config.anchor_on_estimate) anchor = es.abg_pos[i];
          break;
      }
      traces.push_back(predict(m, k, anchor, est, config.horizon, ts));
      if (traces.back().fallback_used) ++mr.fallback_count;
    }
    mr.rmse = rmse(res.truth, traces, config.horizon, config.k0, res.n,
                   config.rmse_form);
    res.report.methods.push_back(mr);
    res.traces.push_back(std::move(traces));
  }
  res.runtime_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t_start)
                            .count();
  return res;
}

nlohmann::json report_json(const ExperimentConfig& config,
                           const ExperimentResult& result) {
  json methods = json::array();
  for (const auto& m : result.report.methods) {
    methods.push_back({{"method", std::string(method_tag(m.method))},
                       {"rmse", {m.rmse(0), m.rmse(1), m.rmse(2)}},
                       {"fallback_count", m.fallback_count}});
  }
  return json{{"scenario", scenario_name(config.scenario)},
              {"n", result.n},
              {"k0", config.k0},
              {"horizon", config.horizon},
              {"n_tilde", result.report.n_tilde},
              {"rmse_form", rmse_form_name(config.rmse_form)},
              {"sigma", result.sigma},
              {"seed", config.seed},
              {"sample_time", result.sample_time},
              {"truth_derivatives", config.truth_derivatives},
              {"invariant_violations", result.invariant_violations},
              {"methods", methods}};
}

namespace {

void put3(std::ostream& out, const Eigen::Vector3d& v) {
  for (int i = 0; i < 3; ++i) out << ',' << format_double(v(i));
}

void header3(std::ostream& out, const std::string& name) {
  out << ',' << name << "_x," << name << "_y," << name << "_z";
}

void write_trace_csv(std::ostream& out, const ExperimentConfig& c,
                     const ExperimentResult& r) {
  const EstimateSeries& es = r.estimates;
  const bool aise = !es.aise_v.empty();
  const bool bdb = !es.bdb_v.empty();
  const bool abg = !es.abg_v.empty();
  const std::vector<PredictionTrace>* fs = nullptr;
  for (std::size_t m = 0; m < c.methods.size(); ++m) {
    if (c.methods[m] == Method::AiseFs) fs = &r.traces[m];
  }

  out << "k,t";
  header3(out, "true");
  header3(out, "meas");
  if (aise) {
    header3(out, "aise_v");
    header3(out, "aise_a");
    header3(out, "aise_j");
    out << ",kappa_t,tau_t,u";
  }
  if (bdb) {
    header3(out, "bdb_v");
    header3(out, "bdb_a");
    header3(out, "bdb_j");
  }
  if (abg) {
    header3(out, "abg_v");
    header3(out, "abg_a");
  }
  if (fs) out << ",fs_fallback";
  out << '\n';

  for (std::size_t k = 0; k < r.truth.size(); ++k) {
    out << k << ',' << format_double(static_cast<double>(k) * r.sample_time);
    put3(out, r.truth[k]);
    put3(out, r.measured[k]);
    if (aise) {
      put3(out, es.aise_v[k]);
      put3(out, es.aise_a[k]);
      put3(out, es.aise_j[k]);
      if (auto s = scalar_params(es.aise_v[k], es.aise_a[k], es.aise_j[k])) {
        out << ',' << format_double(s->kappa_t) << ','
            << format_double(s->tau_t) << ',' << format_double(s->u);
      } else {
        out << ",,," << format_double(es.aise_v[k].norm());
      }
    }
    if (bdb) {
      put3(out, es.bdb_v[k]);
      put3(out, es.bdb_a[k]);
      put3(out, es.bdb_j[k]);
    }
    if (abg) {
      put3(out, es.abg_v[k]);
      put3(out, es.abg_a[k]);
    }
    if (fs) {
      const auto kk = static_cast<std::int64_t>(k);
      out << ',';
      if (kk >= c.k0 && kk - c.k0 < static_cast<std::int64_t>(fs->size())) {
        out << ((*fs)[static_cast<std::size_t>(kk - c.k0)].fallback_used ? 1
                                                                          : 0);
      }
    }
    out << '\n';
  }
}

void write_predictions_csv(std::ostream& out, const ExperimentConfig& c,
                           const ExperimentResult& r) {
  out << "anchor,l";
  for (Method m : c.methods) header3(out, std::string(method_name(m)));
  out << '\n';
  if (r.traces.empty()) return;
  const std::size_t anchors = r.traces.front().size();
  for (std::size_t a = 0; a < anchors; ++a) {
    const int first = c.full_predictions ? 1 : c.horizon;
    for (int l = first; l <= c.horizon; ++l) {
      out << r.traces.front()[a].anchor << ',' << l;
      for (const auto& per_method : r.traces) {
        put3(out, per_method[a].positions[static_cast<std::size_t>(l - 1)]);
      }
      out << '\n';
    }
  }
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

void write_artifacts(const ExperimentConfig& config,
                     const ExperimentResult& result,
                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "report.json");
    out << report_json(config, result).dump(2) << '\n';
  }
  {
    auto out = open_out(out_dir / "trace.csv");
    write_trace_csv(out, config, result);
  }
  {
    auto out = open_out(out_dir / "predictions.csv");
    write_predictions_csv(out, config, result);
  }
  {
    auto out = open_out(out_dir / "manifest.json");
    const json manifest{
        {"code_version", code_version()},
        {"config", config},
        {"config_hash", config_hash(config)},
        {"seed", config.seed},
        {"runtime_seconds", result.runtime_seconds},
        {"files", {"report.json", "trace.csv", "predictions.csv"}}};
    out << manifest.dump(2) << '\n';
  }
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = json(config).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

const char* code_version() { return AISETRAJ_VERSION; }

}  // namespace aisetraj
