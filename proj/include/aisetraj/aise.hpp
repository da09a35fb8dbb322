#pragma once

// Adaptive input and state estimation (AISE) for real-time differentiation of
// a scalar sampled signal.
//
// The signal y_k is modelled as the output of an integrator chain driven by an
// unknown input d_k (see integrator.hpp). A Kalman filter tracks the chain's
// state while an adaptive input-estimation subsystem, tuned online by
// recursive least squares on a retrospective cost, reconstructs d_k. The
// Kalman noise covariances are themselves adapted from the residual
// statistics. The reconstructed input is the derivative estimate.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "aisetraj/integrator.hpp"

namespace aisetraj {

// Raised when a runtime invariant of the estimator is violated (e.g. the RLS
// information matrix loses positive definiteness). Carries the step index.
class AiseError : public std::runtime_error {
 public:
  AiseError(const std::string& what, std::int64_t step)
      : std::runtime_error(what + " at step " + std::to_string(step)),
        step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

struct AiseConfig {
  int order = 1;             // differentiation order, 1..3
  double sample_time = 0.01;
  int n_e = 25;              // input-estimation subsystem order
  int n_f = 50;              // regressor filter window
  double r_z = 1.0;
  double r_d = 0.1;
  double r_theta = std::pow(10.0, -3.5);  // R_theta = r_theta * I
  double r_inf = 1e-4;                    // R_inf = r_inf * I
  double eta_init = 0.002;  // V1 = eta_init * I until adapt_start
  double eta_lower = 1e-6;
  double eta_upper = 0.1;
  double beta = 0.55;
  int tau_n = 5;
  int tau_d = 25;
  double alpha_vrf = 0.002;
  int eta_grid_points = 50;
  int adapt_start = 50;

  int theta_size() const { return 2 * n_e + 1; }

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  // Parameter set used for the parabolic and helical reproduction runs.
  // Order 3 uses r_theta = 1e-6 and beta = 0.5; orders 1 and 2 share the rest.
  static AiseConfig defaults_for_order(int order, double sample_time = 0.01);
};

void to_json(nlohmann::json& j, const AiseConfig& c);
// Unknown keys are rejected; missing keys keep the value already in `c`.
void from_json(const nlohmann::json& j, AiseConfig& c);

// Log-spaced grid of `points` values spanning [lower, upper]. The endpoints
// are exact; with lower == 0 the interior starts from upper * 1e-12.
std::vector<double> eta_grid(double lower, double upper, int points);

// 0.99 quantile of the F(tau_n - 1, tau_d - 1) distribution.
double vrf_critical_value(int tau_n, int tau_d);

// ---------------------------------------------------------------------------
// Building blocks. Each maps one stage of the estimator; AiseEstimator::step
// composes them in the order: residual, input estimate, regressor filtering,
// forgetting factor, RLS update, covariance adaptation, data assimilation,
// forecast.
// ---------------------------------------------------------------------------

// d_hat = phi * theta.
double estimate_input(const Eigen::RowVectorXd& phi,
                      const Eigen::VectorXd& theta);

// Builds phi_k = [d_{k-1} .. d_{k-n_e}, z_k .. z_{k-n_e}] from newest-first
// histories. Missing entries are zero.
Eigen::RowVectorXd build_regressor(std::span<const double> dhat_past,
                                   std::span<const double> z_recent, int n_e);

// x_fc,k+1 = A x_da,k + B d_hat_k.
Eigen::VectorXd forecast_state(const SystemMatrices& sys,
                               const Eigen::VectorXd& x_da, double d_hat);

// z_k = C x_fc,k - y_k.
double forecast_residual(const SystemMatrices& sys,
                         const Eigen::VectorXd& x_fc, double y);

// Impulse-response weights H_1..H_{n_f} of the time-varying closed-loop
// filter. `abar_recent` is newest first: abar_recent[0] = Abar_{k-1}.
// Weights with i > k are zero.
std::vector<double> filter_weights(const SystemMatrices& sys,
                                   std::span<const Eigen::MatrixXd> abar_recent,
                                   std::int64_t k, int n_f);

struct FilteredRegressor {
  Eigen::RowVectorXd phi_f;
  double dhat_f = 0.0;
};

// phi_f = sum_i H_i phi_{k-i}, dhat_f = sum_i H_i d_{k-i}. `dhat_past` holds
// d_{k-1}, d_{k-2}, ... and `z_recent` holds z_k, z_{k-1}, ...
FilteredRegressor filter_regressor(std::span<const double> weights,
                                   std::span<const double> dhat_past,
                                   std::span<const double> z_recent, int n_e);

// Variable-rate forgetting factor from an F-test on the residual variance
// ratio of the last tau_n versus the last tau_d residuals. `z_recent` is
// newest first; fewer than tau_d + 1 samples (k < tau_d) yields 1.
double vrf_lambda(std::span<const double> z_recent, int tau_n, int tau_d,
                  double alpha_vrf, double f_critical);

struct RlsResult {
  Eigen::VectorXd theta;
  Eigen::MatrixXd info;  // P^{-1}_{k+1}
};

// One step of the regularized RLS recursion with forgetting and resetting,
// in information form:
//   P^{-1}_{k+1} = lambda P^{-1}_k + (1 - lambda) R_inf + Phi~' R~ Phi~
//   theta_{k+1}  = theta_k - P_{k+1} Phi~' R~ (z~ + Phi~ theta_k)
// with Phi~ = [phi_f; phi], z~ = [z - dhat_f; 0], R~ = diag(r_z, r_d).
// Throws AiseError(step) if P^{-1}_{k+1} is not positive definite.
RlsResult rls_update(const Eigen::MatrixXd& info, const Eigen::VectorXd& theta,
                     double lambda, double r_inf,
                     const Eigen::RowVectorXd& phi,
                     const Eigen::RowVectorXd& phi_f, double z, double dhat_f,
                     double r_z, double r_d, std::int64_t step);

struct Assimilation {
  Eigen::VectorXd x_da;
  Eigen::VectorXd gain;      // K_da,k
  Eigen::MatrixXd p_da;
  Eigen::MatrixXd p_fc_next; // A P_da A' + eta I
};

// Kalman data-assimilation step with V1 = eta * I. Throws AiseError if the
// innovation variance C P_fc C' + V2 is not positive.
Assimilation data_assimilate(const SystemMatrices& sys,
                             const Eigen::VectorXd& x_fc,
                             const Eigen::MatrixXd& p_fc, double z, double eta,
                             double v2, std::int64_t step);

struct NoiseAdaptation {
  double eta = 0.0;
  double v2 = 0.0;
  bool positive_set_empty = false;
};

// Chooses (eta, V2) minimizing |J_f(eta I) - V2| with
//   J_f(eta I) = sample_var - C (A P_da A' + eta I) C'
// over `grid`. `propagated` is C A P_da,k-1 A' C' and `c_norm2` is C C'.
NoiseAdaptation adapt_noise_covariances(double sample_var, double propagated,
                                        double c_norm2,
                                        std::span<const double> grid,
                                        double beta);

// ---------------------------------------------------------------------------

// Full estimator state. Histories are stored newest first.
struct AiseState {
  std::int64_t k = 0;
  Eigen::VectorXd theta;
  Eigen::MatrixXd info;  // P_rls^{-1}
  Eigen::VectorXd x_fc;
  Eigen::VectorXd x_da;
  Eigen::MatrixXd p_fc;
  Eigen::MatrixXd p_da;
  std::vector<double> dhat_history;          // d_{k-1}, d_{k-2}, ...
  std::vector<double> z_history;             // z_{k-1}, z_{k-2}, ...
  std::vector<Eigen::MatrixXd> abar_history; // Abar_{k-1}, Abar_{k-2}, ...
  double residual_mean = 0.0;
  double residual_m2 = 0.0;
  double eta = 0.0;
  double v2 = 0.0;
  double lambda = 1.0;
  double last_dhat = 0.0;
};

// Per-step quantities exposed for invariant checks and tracing.
struct StepDiagnostics {
  double residual = 0.0;
  Eigen::RowVectorXd phi;    // regressor used for d_hat_k
  Eigen::RowVectorXd phi_f;  // filtered regressor
  double dhat_f = 0.0;
  double sample_var = 0.0;
  double propagated = 0.0;  // C A P_da,k-1 A' C'
  bool adapted = false;
  NoiseAdaptation adaptation;
};

class AiseEstimator {
 public:
  explicit AiseEstimator(AiseConfig config);

  // Consumes y_k, returns d_hat_k and advances to step k + 1.
  double step(double y);

  const AiseConfig& config() const { return config_; }
  const AiseState& state() const { return state_; }
  const SystemMatrices& system() const { return sys_; }
  const StepDiagnostics& last_diagnostics() const { return diag_; }
  std::span<const double> grid() const { return grid_; }

  // P_rls (the inverse of the stored information matrix).
  Eigen::MatrixXd rls_covariance() const;

  // Checkpoint / restore. The restored estimator continues bit-identically.
  nlohmann::json snapshot() const;
  static AiseEstimator restore(const nlohmann::json& snapshot);

 private:
  AiseConfig config_;
  SystemMatrices sys_;
  std::vector<double> grid_;
  double f_critical_ = 1.0;
  AiseState state_;
  StepDiagnostics diag_;
};

}  // namespace aisetraj
