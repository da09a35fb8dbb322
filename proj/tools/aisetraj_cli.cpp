// aisetraj: differentiate position streams, predict trajectories and
// reproduce the parabolic and helical experiments.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aisetraj/aise.hpp"
#include "aisetraj/baselines.hpp"
#include "aisetraj/frenet.hpp"
#include "aisetraj/harness.hpp"
#include "aisetraj/predictor.hpp"
#include "aisetraj/scenarios.hpp"
#include "aisetraj/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aisetraj;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

// Writes to `path`, or stdout when empty.
template <typename F>
void with_output(const std::string& path, F&& body) {
  if (path.empty()) {
    body(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  body(out);
}

struct DifferentiateArgs {
  std::string input;
  std::string output;
  std::string config;
  int order = 1;
};

int run_differentiate(const DifferentiateArgs& args) {
  const PositionSeries series = read_position_csv(args.input);
  AiseConfig cfg = AiseConfig::defaults_for_order(args.order, series.sample_time);
  if (!args.config.empty()) from_json(read_json_file(args.config), cfg);
  cfg.order = args.order;
  cfg.sample_time = series.sample_time;
  std::vector<AiseEstimator> est(3, AiseEstimator(cfg));
  with_output(args.output, [&](std::ostream& out) {
    out << "k,t,d_x,d_y,d_z\n";
    for (std::size_t k = 0; k < series.p.size(); ++k) {
      out << k << ',' << format_double(series.t[k]);
      for (int axis = 0; axis < 3; ++axis) {
        out << ',' << format_double(est[axis].step(series.p[k](axis)));
      }
      out << '\n';
    }
  });
  return 0;
}

struct PredictArgs {
  std::string input;
  std::string output;
  std::string config;
  std::string method = "aise-fs";
  int horizon = 100;
  std::int64_t anchor = -1;
};

int run_predict(const PredictArgs& args) {
  const PositionSeries series = read_position_csv(args.input);
  ExperimentConfig exp;
  if (!args.config.empty()) from_json(read_json_file(args.config), exp);
  const Method method = parse_method(args.method);
  const auto last = static_cast<std::int64_t>(series.p.size()) - 1;
  const std::int64_t anchor = args.anchor < 0 ? last : args.anchor;
  if (anchor > last) throw std::invalid_argument("anchor beyond input");
  const double ts = series.sample_time;

  DerivativeEstimate est;
  for (int axis = 0; axis < 3; ++axis) {
    double v = 0.0, a = 0.0, j = 0.0;
    if (method == Method::AiseVa || method == Method::AiseFs) {
      std::vector<AiseEstimator> bank;
      for (AiseConfig c : exp.aise) {
        c.sample_time = ts;
        bank.emplace_back(c);
      }
      for (std::int64_t k = 0; k <= anchor; ++k) {
        const double y = series.p[static_cast<std::size_t>(k)](axis);
        v = bank[0].step(y);
        a = bank[1].step(y);
        j = bank[2].step(y);
      }
    } else if (method == Method::BdbVa) {
      BdbDifferentiator bdb(exp.butterworth.order, exp.butterworth.cutoff, ts);
      for (std::int64_t k = 0; k <= anchor; ++k) {
        const DerivativeTriple d =
            bdb.step(series.p[static_cast<std::size_t>(k)](axis));
        v = d.v;
        a = d.a;
        j = d.j;
      }
    } else {
      AbgFilter abg(exp.tracking_index, ts);
      for (std::int64_t k = 0; k <= anchor; ++k) {
        const Eigen::Vector3d x =
            abg.step(series.p[static_cast<std::size_t>(k)](axis));
        v = x(1);
        a = x(2);
      }
    }
    est.v(axis) = v;
    est.a(axis) = a;
    if (!est.j) est.j = Eigen::Vector3d::Zero();
    (*est.j)(axis) = j;
  }
  const PredictionTrace trace =
      predict(method, anchor, series.p[static_cast<std::size_t>(anchor)], est,
              args.horizon, ts);
  with_output(args.output, [&](std::ostream& out) {
    out << "anchor,l,t,x,y,z,fallback\n";
    for (int l = 1; l <= args.horizon; ++l) {
      const auto& p = trace.positions[static_cast<std::size_t>(l - 1)];
      out << anchor << ',' << l << ','
          << format_double(series.t[static_cast<std::size_t>(anchor)] + l * ts);
      for (int i = 0; i < 3; ++i) out << ',' << format_double(p(i));
      out << ',' << (trace.fallback_used ? 1 : 0) << '\n';
    }
  });
  return 0;
}

struct ExperimentArgs {
  std::string config;
  std::optional<std::string> scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma;
  std::optional<int> horizon;
  std::optional<std::int64_t> n_steps;
  std::optional<std::int64_t> k0;
  std::optional<std::string> methods;
  std::optional<std::string> rmse_form;
  bool truth_derivatives = false;
  std::string out_dir = "out";
  int repeat = 1;
};

ExperimentConfig build_experiment_config(const ExperimentArgs& a) {
  ExperimentConfig c;
  if (!a.config.empty()) from_json(read_json_file(a.config), c);
  if (a.scenario) {
    const std::string& s = *a.scenario;
    if (s.rfind("csv:", 0) == 0) {
      c.scenario = ScenarioKind::Csv;
      c.csv_path = s.substr(4);
    } else {
      c.scenario = parse_scenario(s);
    }
  }
  if (a.seed) c.seed = *a.seed;
  if (a.sigma) c.sigma = *a.sigma;
  if (a.horizon) c.horizon = *a.horizon;
  if (a.n_steps) c.n_steps = *a.n_steps;
  if (a.k0) c.k0 = *a.k0;
  if (a.methods) {
    c.methods.clear();
    for (const auto& m : split_csv_line(*a.methods)) {
      c.methods.push_back(parse_method(m));
    }
  }
  if (a.rmse_form) c.rmse_form = parse_rmse_form(*a.rmse_form);
  if (a.truth_derivatives) c.truth_derivatives = true;
  c.validate();
  return c;
}

void print_report(const ExperimentConfig& c, const ExperimentResult& r) {
  std::cout << scenario_name(c.scenario) << " seed " << c.seed << " sigma "
            << r.sigma << " N~ " << r.report.n_tilde << " ("
            << rmse_form_name(c.rmse_form) << " RMSE, m)\n";
  for (const auto& m : r.report.methods) {
    std::cout << "  " << method_tag(m.method) << ": " << m.rmse(0) << ' '
              << m.rmse(1) << ' ' << m.rmse(2);
    if (m.fallback_count > 0) std::cout << "  fallback " << m.fallback_count;
    std::cout << '\n';
  }
  for (const auto& v : r.invariant_violations) {
    std::cerr << "invariant violation: " << v << '\n';
  }
}

int run_experiment_cmd(const ExperimentArgs& args) {
  const ExperimentConfig base = build_experiment_config(args);
  if (args.repeat <= 1) {
    const ExperimentResult r = run_experiment(base);
    write_artifacts(base, r, args.out_dir);
    print_report(base, r);
    return r.invariant_violations.empty() ? 0 : 3;
  }
  bool clean = true;
  json runs = json::array();
  std::vector<std::vector<Eigen::Vector3d>> rmse_by_method(base.methods.size());
  for (int i = 0; i < args.repeat; ++i) {
    ExperimentConfig c = base;
    c.seed = base.seed + static_cast<std::uint64_t>(i);
    const ExperimentResult r = run_experiment(c);
    write_artifacts(c, r, fs::path(args.out_dir) / ("seed_" + std::to_string(c.seed)));
    print_report(c, r);
    clean = clean && r.invariant_violations.empty();
    runs.push_back(report_json(c, r));
    for (std::size_t m = 0; m < r.report.methods.size(); ++m) {
      rmse_by_method[m].push_back(r.report.methods[m].rmse);
    }
  }
  json mean = json::array();
  for (std::size_t m = 0; m < base.methods.size(); ++m) {
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    for (const auto& v : rmse_by_method[m]) s += v;
    s /= static_cast<double>(rmse_by_method[m].size());
    mean.push_back({{"method", std::string(method_tag(base.methods[m]))},
                    {"mean_rmse", {s(0), s(1), s(2)}}});
  }
  std::ofstream out(fs::path(args.out_dir) / "summary.json", std::ios::binary);
  out << json{{"runs", runs}, {"mean", mean}}.dump(2) << '\n';
  return clean ? 0 : 3;
}

// Composite Simpson rule for int_0^ts exp(hat(omega) t) dt.
Eigen::Matrix3d simpson_exp_integral(const Eigen::Vector3d& omega, double ts,
                                     int panels) {
  const double h = ts / panels;
  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  for (int i = 0; i <= panels; ++i) {
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * gamma0(omega * (i * h));
  }
  return sum * h / 3.0;
}

int run_goldens(const std::string& output) {
  json g;
  const double ts = 0.01;

  const AbgGains gains = abg_gains(0.6, ts);
  const Eigen::Matrix3d err = abg_error_dynamics(gains, ts);
  g["abg"] = {{"tracking_index", 0.6},
              {"sample_time", ts},
              {"alpha", gains.alpha},
              {"beta", gains.beta},
              {"gamma", gains.gamma},
              {"spectral_radius", err.eigenvalues().cwiseAbs().maxCoeff()}};

  const TruthSample h = helical(0, ts);
  const auto hp = scalar_params(h.v, h.a, h.j).value();
  g["helix_frenet"] = {{"u", hp.u}, {"kappa_t", hp.kappa_t}, {"tau_t", hp.tau_t}};

  const TruthSample p = parabolic(0, ts);
  const auto pp = scalar_params(p.v, p.a, p.j).value();
  g["parabola_frenet"] = {
      {"u", pp.u}, {"kappa_t", pp.kappa_t}, {"tau_t", pp.tau_t}};

  const ButterworthCascade bw(10, 0.8 * std::numbers::pi);
  json sections = json::array();
  for (const auto& s : bw.sections()) {
    sections.push_back({s.b[0], s.b[1], s.b[2], s.a[1], s.a[2]});
  }
  g["butterworth"] = {{"order", 10},
                      {"cutoff", bw.cutoff()},
                      {"sections", sections},
                      {"gain_at_cutoff", std::abs(bw.response(bw.cutoff()))}};

  const Eigen::Vector3d omega(hp.u * hp.tau_t, 0.0, hp.u * hp.kappa_t);
  const Eigen::Matrix3d quad = simpson_exp_integral(omega, ts, 10000);
  const Eigen::Matrix3d closed = ts * gamma1(omega * ts);
  g["gamma1_quadrature"] = {
      {"omega", {omega(0), omega(1), omega(2)}},
      {"sample_time", ts},
      {"max_abs_diff", (quad - closed).cwiseAbs().maxCoeff()}};

  g["n_tilde"] = {{"n", 5000}, {"horizon", 100}, {"k0", 2000},
                  {"value", n_tilde(5000, 100, 2000)}};

  with_output(output, [&](std::ostream& out) { out << g.dump(2) << '\n'; });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive numerical differentiation and trajectory prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  DifferentiateArgs diff;
  auto* diff_cmd = app.add_subcommand(
      "differentiate", "Estimate a derivative of each column of a t,x,y,z CSV");
  diff_cmd->add_option("input", diff.input, "Input CSV (t,x,y,z)")->required();
  diff_cmd->add_option("--order", diff.order, "Derivative order")
      ->check(CLI::Range(1, 3));
  diff_cmd->add_option("--config", diff.config, "AISE parameter JSON");
  diff_cmd->add_option("-o,--output", diff.output, "Output CSV (default stdout)");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand(
      "predict", "Predict positions after an anchor sample of a t,x,y,z CSV");
  pred_cmd->add_option("input", pred.input, "Input CSV (t,x,y,z)")->required();
  pred_cmd->add_option("--method", pred.method,
                       "aise-va, aise-fs, bdb-va or abg-va");
  pred_cmd->add_option("--horizon", pred.horizon, "Steps to predict")
      ->check(CLI::PositiveNumber);
  pred_cmd->add_option("--anchor", pred.anchor,
                       "Anchor sample index (default: last)");
  pred_cmd->add_option("--config", pred.config, "Experiment config JSON");
  pred_cmd->add_option("-o,--output", pred.output, "Output CSV (default stdout)");

  ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a reproduction experiment");
  exp_cmd->add_option("--config", exp.config, "Experiment config JSON");
  exp_cmd->add_option("--scenario", exp.scenario,
                      "parabolic, helical or csv:<path>");
  exp_cmd->add_option("--seed", exp.seed, "Noise seed");
  exp_cmd->add_option("--sigma", exp.sigma, "Noise standard deviation, m");
  exp_cmd->add_option("--horizon", exp.horizon, "Prediction horizon, steps");
  exp_cmd->add_option("--n-steps", exp.n_steps, "Last sample index N");
  exp_cmd->add_option("--k0", exp.k0, "First RMSE anchor");
  exp_cmd->add_option("--methods", exp.methods,
                      "Comma-separated: aise-va,aise-fs,bdb-va,abg-va");
  exp_cmd->add_option("--rmse-form", exp.rmse_form, "standard or literal");
  exp_cmd->add_flag("--truth-derivatives", exp.truth_derivatives,
                    "Use exact derivatives instead of estimates");
  exp_cmd->add_option("--out-dir", exp.out_dir, "Artifact directory");
  exp_cmd->add_option("--repeat", exp.repeat,
                      "Run consecutive seeds and write summary.json")
      ->check(CLI::PositiveNumber);

  std::string goldens_out;
  auto* gold_cmd =
      app.add_subcommand("goldens", "Regenerate derived reference values");
  gold_cmd->add_option("-o,--output", goldens_out, "Output JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*diff_cmd) return run_differentiate(diff);
    if (*pred_cmd) return run_predict(pred);
    if (*exp_cmd) return run_experiment_cmd(exp);
    if (*gold_cmd) return run_goldens(goldens_out);
  } catch (const AiseError& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
