#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "aisetraj/aise.hpp"
#include "aisetraj/predictor.hpp"
#include "aisetraj/scenarios.hpp"

namespace aisetraj {

enum class ScenarioKind { Parabolic, Helical, Csv };
enum class RmseForm { Standard, Literal };

struct ButterworthSpec {
  int order = 10;
  double cutoff = 0.8 * 3.14159265358979323846;  // rad/sample
};

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
  ScenarioKind scenario = ScenarioKind::Helical;
  std::string csv_path;        // for ScenarioKind::Csv
  std::int64_t n_steps = 5000; // samples 0..n_steps; ignored for CSV input
  std::int64_t k0 = 2000;
  int horizon = 100;
  std::optional<double> sigma;  // unset: 1.0 parabolic, 0.1 helical, 0 CSV
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::AiseVa, Method::AiseFs, Method::BdbVa,
                              Method::AbgVa};
  RmseForm rmse_form = RmseForm::Standard;
  bool truth_derivatives = false;   // bypass estimators with exact v, a, j
  bool anchor_on_estimate = false;  // anchor at the filtered position
  bool full_predictions = false;    // write every l, not only l = horizon
  double sample_time = 0.01;
  std::array<AiseConfig, 3> aise{AiseConfig::defaults_for_order(1),
                                 AiseConfig::defaults_for_order(2),
                                 AiseConfig::defaults_for_order(3)};
  ButterworthSpec butterworth;
  double tracking_index = 0.6;

  double effective_sigma() const;
  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

std::string scenario_name(ScenarioKind s);
ScenarioKind parse_scenario(const std::string& s);
std::string rmse_form_name(RmseForm f);
RmseForm parse_rmse_form(const std::string& s);

// Unknown keys are rejected. Missing keys keep the value already in `c`;
// AISE blocks are partial overrides of the per-order defaults.
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// Number of anchors k0..n - horizon.
std::int64_t n_tilde(std::int64_t n, int horizon, std::int64_t k0);

// Per-axis RMSE of p_{k+horizon} over anchors k0..n - horizon against
// `truth` (indexed by step). `traces` must hold one trace per anchor.
Eigen::Vector3d rmse(std::span<const Eigen::Vector3d> truth,
                     std::span<const PredictionTrace> traces, int horizon,
                     std::int64_t k0, std::int64_t n, RmseForm form);

struct MethodResult {
  Method method = Method::AiseVa;
  Eigen::Vector3d rmse = Eigen::Vector3d::Zero();
  std::int64_t fallback_count = 0;
};

struct RmseReport {
  std::vector<MethodResult> methods;
  std::int64_t n_tilde = 0;
  const MethodResult* find(Method m) const;
};

// Per-step estimates. Unused groups stay empty.
struct EstimateSeries {
  std::vector<Eigen::Vector3d> aise_v, aise_a, aise_j, aise_pos;
  std::vector<Eigen::Vector3d> bdb_v, bdb_a, bdb_j, bdb_pos;
  std::vector<Eigen::Vector3d> abg_v, abg_a, abg_pos;
};

struct ExperimentResult {
  RmseReport report;
  double sample_time = 0.0;
  double sigma = 0.0;
  std::int64_t n = 0;  // last sample index
  std::vector<Eigen::Vector3d> truth;
  std::vector<Eigen::Vector3d> measured;
  EstimateSeries estimates;
  std::vector<std::vector<PredictionTrace>> traces;  // per method, per anchor
  // AISE channels that raised AiseError; their later estimates are NaN and
  // the RMSE of the methods using them is NaN.
  std::vector<std::string> invariant_violations;
  double runtime_seconds = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

nlohmann::json report_json(const ExperimentConfig& config,
                           const ExperimentResult& result);

// Writes report.json, trace.csv, predictions.csv and manifest.json. Only the
// manifest carries run-dependent data (runtime).
void write_artifacts(const ExperimentConfig& config,
                     const ExperimentResult& result,
                     const std::filesystem::path& out_dir);

// 64-bit FNV-1a of the canonical config dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

const char* code_version();

}  // namespace aisetraj
