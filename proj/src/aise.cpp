#include "aisetraj/aise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/fisher_f.hpp>
#include <nlohmann/json.hpp>

namespace aisetraj {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Sample variance (divisor n - 1) of the first n entries.
double sample_variance(std::span<const double> v, int n) {
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += v[i];
  mean /= n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) ss += (v[i] - mean) * (v[i] - mean);
  return ss / (n - 1);
}

template <typename T>
void push_front_bounded(std::vector<T>& buf, T value) {
  std::rotate(buf.rbegin(), buf.rbegin() + 1, buf.rend());
  buf.front() = std::move(value);
}

}  // namespace

void AiseConfig::validate() const {
  require(order >= 1 && order <= 3, "order must be 1, 2 or 3");
  require(sample_time > 0.0, "sample_time must be positive");
  require(n_e >= 1, "n_e must be >= 1");
  require(n_f >= 1, "n_f must be >= 1");
  require(r_z > 0.0, "r_z must be positive");
  require(r_d > 0.0, "r_d must be positive");
  require(r_theta > 0.0, "r_theta must be positive");
  require(r_inf > 0.0, "r_inf must be positive");
  require(eta_lower >= 0.0 && eta_lower <= eta_upper,
          "eta bounds must satisfy 0 <= eta_lower <= eta_upper");
  require(eta_upper > 0.0, "eta_upper must be positive");
  require(eta_init >= 0.0, "eta_init must be nonnegative");
  require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
  require(tau_n >= 2, "tau_n must be >= 2");
  require(tau_d > tau_n, "tau_d must exceed tau_n");
  require(alpha_vrf >= 0.0, "alpha_vrf must be nonnegative");
  require(eta_grid_points >= 1, "eta_grid_points must be >= 1");
  require(adapt_start >= 1, "adapt_start must be >= 1");
}

AiseConfig AiseConfig::defaults_for_order(int order, double sample_time) {
  AiseConfig c;
  c.order = order;
  c.sample_time = sample_time;
  if (order == 3) {
    c.r_theta = 1e-6;
    c.beta = 0.5;
  }
  return c;
}

std::vector<double> eta_grid(double lower, double upper, int points) {
  if (points == 1 || lower == upper) return std::vector<double>(points, upper);
  const double lo = lower > 0.0 ? lower : upper * 1e-12;
  const double log_lo = std::log10(lo);
  const double log_hi = std::log10(upper);
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) {
    grid[i] = std::pow(10.0, log_lo + (log_hi - log_lo) * i / (points - 1));
  }
  grid.front() = lower;
  grid.back() = upper;
  return grid;
}

double vrf_critical_value(int tau_n, int tau_d) {
  boost::math::fisher_f_distribution<double> dist(tau_n - 1, tau_d - 1);
  return boost::math::quantile(dist, 0.99);
}

double estimate_input(const Eigen::RowVectorXd& phi,
                      const Eigen::VectorXd& theta) {
  return phi.dot(theta.transpose());
}

Eigen::RowVectorXd build_regressor(std::span<const double> dhat_past,
                                   std::span<const double> z_recent, int n_e) {
  Eigen::RowVectorXd phi = Eigen::RowVectorXd::Zero(2 * n_e + 1);
  for (int j = 0; j < n_e && j < static_cast<int>(dhat_past.size()); ++j) {
    phi(j) = dhat_past[j];
  }
  for (int j = 0; j <= n_e && j < static_cast<int>(z_recent.size()); ++j) {
    phi(n_e + j) = z_recent[j];
  }
  return phi;
}

Eigen::VectorXd forecast_state(const SystemMatrices& sys,
                               const Eigen::VectorXd& x_da, double d_hat) {
  return sys.A * x_da + sys.B * d_hat;
}

double forecast_residual(const SystemMatrices& sys,
                         const Eigen::VectorXd& x_fc, double y) {
  return sys.C.dot(x_fc.transpose()) - y;
}

std::vector<double> filter_weights(const SystemMatrices& sys,
                                   std::span<const Eigen::MatrixXd> abar_recent,
                                   std::int64_t k, int n_f) {
  std::vector<double> h(n_f, 0.0);
  Eigen::RowVectorXd row = sys.C;
  for (int i = 1; i <= n_f && i <= k; ++i) {
    if (i >= 2) row = row * abar_recent[i - 2];
    h[i - 1] = row.dot(sys.B.transpose());
  }
  return h;
}

FilteredRegressor filter_regressor(std::span<const double> weights,
                                   std::span<const double> dhat_past,
                                   std::span<const double> z_recent, int n_e) {
  FilteredRegressor out;
  out.phi_f = Eigen::RowVectorXd::Zero(2 * n_e + 1);
  const int n_f = static_cast<int>(weights.size());
  const auto d_at = [&](std::size_t idx) {
    return idx < dhat_past.size() ? dhat_past[idx] : 0.0;
  };
  const auto z_at = [&](std::size_t idx) {
    return idx < z_recent.size() ? z_recent[idx] : 0.0;
  };
  for (int i = 1; i <= n_f; ++i) {
    const double h = weights[i - 1];
    if (h == 0.0) continue;
    out.dhat_f += h * d_at(i - 1);
    // phi_{k-i} = [d_{k-i-1} .. d_{k-i-n_e}, z_{k-i} .. z_{k-i-n_e}]
    for (int j = 0; j < n_e; ++j) out.phi_f(j) += h * d_at(i + j);
    for (int j = 0; j <= n_e; ++j) out.phi_f(n_e + j) += h * z_at(i + j);
  }
  return out;
}

double vrf_lambda(std::span<const double> z_recent, int tau_n, int tau_d,
                  double alpha_vrf, double f_critical) {
  if (static_cast<int>(z_recent.size()) < tau_d + 1) return 1.0;
  const double var_d = sample_variance(z_recent, tau_d);
  if (!(var_d > 0.0)) return 1.0;
  const double var_n = sample_variance(z_recent, tau_n);
  const double f = var_n / var_d;
  if (f <= f_critical) return 1.0;
  return 1.0 / (1.0 + alpha_vrf * (f - f_critical));
}

RlsResult rls_update(const Eigen::MatrixXd& info, const Eigen::VectorXd& theta,
                     double lambda, double r_inf,
                     const Eigen::RowVectorXd& phi,
                     const Eigen::RowVectorXd& phi_f, double z, double dhat_f,
                     double r_z, double r_d, std::int64_t step) {
  RlsResult out;
  out.info = lambda * info;
  out.info.diagonal().array() += (1.0 - lambda) * r_inf;
  out.info.noalias() += r_z * phi_f.transpose() * phi_f;
  out.info.noalias() += r_d * phi.transpose() * phi;
  out.info = symmetrize(out.info);

  Eigen::LLT<Eigen::MatrixXd> llt(out.info);
  if (llt.info() != Eigen::Success) {
    throw AiseError("RLS information matrix lost positive definiteness", step);
  }
  // Phi~' R~ (z~ + Phi~ theta)
  const double e_perf = z - dhat_f + phi_f.dot(theta.transpose());
  const double e_input = phi.dot(theta.transpose());
  const Eigen::VectorXd g =
      r_z * e_perf * phi_f.transpose() + r_d * e_input * phi.transpose();
  out.theta = theta - llt.solve(g);
  return out;
}

Assimilation data_assimilate(const SystemMatrices& sys,
                             const Eigen::VectorXd& x_fc,
                             const Eigen::MatrixXd& p_fc, double z, double eta,
                             double v2, std::int64_t step) {
  const int n = sys.dim();
  const Eigen::VectorXd pct = p_fc * sys.C.transpose();
  const double innovation = sys.C.dot(pct.transpose()) + v2;
  if (!(innovation > 0.0)) {
    throw AiseError("singular innovation covariance", step);
  }
  Assimilation out;
  out.gain = -pct / innovation;
  out.x_da = x_fc + out.gain * z;
  const Eigen::MatrixXd i_kc =
      Eigen::MatrixXd::Identity(n, n) + out.gain * sys.C;
  out.p_da = symmetrize(i_kc * p_fc);
  out.p_fc_next = symmetrize(sys.A * out.p_da * sys.A.transpose());
  out.p_fc_next.diagonal().array() += eta;
  return out;
}

NoiseAdaptation adapt_noise_covariances(double sample_var, double propagated,
                                        double c_norm2,
                                        std::span<const double> grid,
                                        double beta) {
  const auto j_f = [&](double eta) {
    return sample_var - propagated - eta * c_norm2;
  };
  double pos_min = std::numeric_limits<double>::infinity();
  double pos_max = -std::numeric_limits<double>::infinity();
  for (double eta : grid) {
    const double j = j_f(eta);
    if (j > 0.0) {
      pos_min = std::min(pos_min, j);
      pos_max = std::max(pos_max, j);
    }
  }

  NoiseAdaptation out;
  out.positive_set_empty = !(pos_max > 0.0);
  const double target =
      out.positive_set_empty ? 0.0 : beta * pos_min + (1.0 - beta) * pos_max;
  double best = std::numeric_limits<double>::infinity();
  for (double eta : grid) {
    const double gap = std::abs(j_f(eta) - target);
    if (gap < best) {
      best = gap;
      out.eta = eta;
    }
  }
  out.v2 = out.positive_set_empty ? 0.0 : j_f(out.eta);
  return out;
}

AiseEstimator::AiseEstimator(AiseConfig config)
    : config_(config),
      sys_(build_integrator(config.order, config.sample_time)) {
  config_.validate();
  grid_ = eta_grid(config_.eta_lower, config_.eta_upper,
                   config_.eta_grid_points);
  f_critical_ = vrf_critical_value(config_.tau_n, config_.tau_d);

  const int n = sys_.dim();
  const int l = config_.theta_size();
  state_.theta = Eigen::VectorXd::Zero(l);
  state_.info = Eigen::MatrixXd::Identity(l, l) * config_.r_theta;
  state_.x_fc = Eigen::VectorXd::Zero(n);
  state_.x_da = Eigen::VectorXd::Zero(n);
  state_.p_fc = Eigen::MatrixXd::Zero(n, n);
  state_.p_da = Eigen::MatrixXd::Zero(n, n);
  state_.dhat_history.assign(config_.n_e + config_.n_f, 0.0);
  state_.z_history.assign(
      std::max(config_.n_e + config_.n_f + 1, config_.tau_d + 1), 0.0);
  state_.abar_history.assign(std::max(config_.n_f - 1, 1),
                             Eigen::MatrixXd::Zero(n, n));
  state_.eta = config_.eta_init;
  state_.v2 = 1.0;
}

double AiseEstimator::step(double y) {
  AiseState& s = state_;
  const AiseConfig& c = config_;
  const std::int64_t k = s.k;

  const double z = forecast_residual(sys_, s.x_fc, y);
  push_front_bounded(s.z_history, z);
  const std::span<const double> z_recent(s.z_history);
  const std::span<const double> d_past(s.dhat_history);

  const Eigen::RowVectorXd phi = build_regressor(d_past, z_recent, c.n_e);
  const double dhat = estimate_input(phi, s.theta);

  const std::vector<double> h = filter_weights(
      sys_, std::span<const Eigen::MatrixXd>(s.abar_history), k, c.n_f);
  const FilteredRegressor filt = filter_regressor(h, d_past, z_recent, c.n_e);

  const std::size_t available =
      std::min<std::size_t>(z_recent.size(), static_cast<std::size_t>(k) + 1);
  s.lambda = vrf_lambda(z_recent.first(available), c.tau_n, c.tau_d,
                        c.alpha_vrf, f_critical_);

  diag_ = StepDiagnostics{};
  diag_.phi = phi;
  diag_.phi_f = filt.phi_f;
  diag_.dhat_f = filt.dhat_f;

  RlsResult rls = rls_update(s.info, s.theta, s.lambda, c.r_inf, phi,
                             filt.phi_f, z, filt.dhat_f, c.r_z, c.r_d, k);
  s.theta = std::move(rls.theta);
  s.info = std::move(rls.info);

  // Residual statistics over z_0..z_k (mean divides by k + 1, variance by k).
  const double count = static_cast<double>(k + 1);
  const double delta = z - s.residual_mean;
  s.residual_mean += delta / count;
  s.residual_m2 += delta * (z - s.residual_mean);

  diag_.residual = z;
  diag_.sample_var = k > 0 ? s.residual_m2 / static_cast<double>(k) : 0.0;
  const Eigen::MatrixXd propagated_cov = sys_.A * s.p_da * sys_.A.transpose();
  diag_.propagated = sys_.C * propagated_cov * sys_.C.transpose();
  if (k >= c.adapt_start) {
    diag_.adaptation =
        adapt_noise_covariances(diag_.sample_var, diag_.propagated,
                                sys_.C.squaredNorm(), grid_, c.beta);
    diag_.adapted = true;
    s.eta = diag_.adaptation.eta;
    s.v2 = diag_.adaptation.v2;
  } else {
    s.eta = c.eta_init;
    s.v2 = 1.0;
  }

  // P_fc,0 = 0; afterwards the forecast covariance carries the V1 chosen at
  // this step so that C P_fc C' + V2 is the innovation variance S_k.
  if (k > 0) {
    s.p_fc = symmetrize(propagated_cov);
    s.p_fc.diagonal().array() += s.eta;
  }
  Assimilation da = data_assimilate(sys_, s.x_fc, s.p_fc, z, s.eta, s.v2, k);
  s.x_da = std::move(da.x_da);
  s.p_da = std::move(da.p_da);

  const int n = sys_.dim();
  Eigen::MatrixXd abar =
      sys_.A * (Eigen::MatrixXd::Identity(n, n) + da.gain * sys_.C);
  push_front_bounded(s.abar_history, std::move(abar));

  s.x_fc = forecast_state(sys_, s.x_da, dhat);
  push_front_bounded(s.dhat_history, dhat);
  s.last_dhat = dhat;
  ++s.k;
  return dhat;
}

Eigen::MatrixXd AiseEstimator::rls_covariance() const {
  return state_.info.llt().solve(
      Eigen::MatrixXd::Identity(state_.info.rows(), state_.info.cols()));
}

// ---------------------------------------------------------------------------
// Snapshot

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void to_json(nlohmann::json& j, const AiseConfig& c) {
  j = nlohmann::json{{"order", c.order},
                     {"sample_time", c.sample_time},
                     {"n_e", c.n_e},
                     {"n_f", c.n_f},
                     {"r_z", c.r_z},
                     {"r_d", c.r_d},
                     {"r_theta", c.r_theta},
                     {"r_inf", c.r_inf},
                     {"eta_init", c.eta_init},
                     {"eta_lower", c.eta_lower},
                     {"eta_upper", c.eta_upper},
                     {"beta", c.beta},
                     {"tau_n", c.tau_n},
                     {"tau_d", c.tau_d},
                     {"alpha_vrf", c.alpha_vrf},
                     {"eta_grid_points", c.eta_grid_points},
                     {"adapt_start", c.adapt_start}};
}

void from_json(const nlohmann::json& j, AiseConfig& c) {
  // Missing keys keep their current value so partial overrides work.
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {
        "order",   "sample_time", "n_e",       "n_f",        "r_z",
        "r_d",     "r_theta",     "r_inf",     "eta_init",   "eta_lower",
        "eta_upper", "beta",      "tau_n",     "tau_d",      "alpha_vrf",
        "eta_grid_points", "adapt_start"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
          return key == k;
        }) == std::end(known)) {
      throw std::invalid_argument("unknown AISE config field: " + key);
    }
  }
  get("order", c.order);
  get("sample_time", c.sample_time);
  get("n_e", c.n_e);
  get("n_f", c.n_f);
  get("r_z", c.r_z);
  get("r_d", c.r_d);
  get("r_theta", c.r_theta);
  get("r_inf", c.r_inf);
  get("eta_init", c.eta_init);
  get("eta_lower", c.eta_lower);
  get("eta_upper", c.eta_upper);
  get("beta", c.beta);
  get("tau_n", c.tau_n);
  get("tau_d", c.tau_d);
  get("alpha_vrf", c.alpha_vrf);
  get("eta_grid_points", c.eta_grid_points);
  get("adapt_start", c.adapt_start);
}

nlohmann::json AiseEstimator::snapshot() const {
  const AiseState& s = state_;
  nlohmann::json abar = nlohmann::json::array();
  for (const auto& m : s.abar_history) abar.push_back(matrix_to_json(m));
  return nlohmann::json{
      {"version", 1},
      {"config", config_},
      {"state",
       {{"k", s.k},
        {"theta", vector_to_json(s.theta)},
        {"info", matrix_to_json(s.info)},
        {"x_fc", vector_to_json(s.x_fc)},
        {"x_da", vector_to_json(s.x_da)},
        {"p_fc", matrix_to_json(s.p_fc)},
        {"p_da", matrix_to_json(s.p_da)},
        {"dhat_history", s.dhat_history},
        {"z_history", s.z_history},
        {"abar_history", std::move(abar)},
        {"residual_mean", s.residual_mean},
        {"residual_m2", s.residual_m2},
        {"eta", s.eta},
        {"v2", s.v2},
        {"lambda", s.lambda},
        {"last_dhat", s.last_dhat}}}};
}

AiseEstimator AiseEstimator::restore(const nlohmann::json& snap) {
  if (snap.at("version").get<int>() != 1) {
    throw std::invalid_argument("unsupported AISE snapshot version");
  }
  AiseEstimator est(snap.at("config").get<AiseConfig>());
  const auto& j = snap.at("state");
  AiseState& s = est.state_;
  const AiseState fresh = s;
  s.k = j.at("k").get<std::int64_t>();
  s.theta = vector_from_json(j.at("theta"));
  s.info = matrix_from_json(j.at("info"));
  s.x_fc = vector_from_json(j.at("x_fc"));
  s.x_da = vector_from_json(j.at("x_da"));
  s.p_fc = matrix_from_json(j.at("p_fc"));
  s.p_da = matrix_from_json(j.at("p_da"));
  s.dhat_history = j.at("dhat_history").get<std::vector<double>>();
  s.z_history = j.at("z_history").get<std::vector<double>>();
  s.abar_history.clear();
  for (const auto& m : j.at("abar_history")) {
    s.abar_history.push_back(matrix_from_json(m));
  }
  s.residual_mean = j.at("residual_mean").get<double>();
  s.residual_m2 = j.at("residual_m2").get<double>();
  s.eta = j.at("eta").get<double>();
  s.v2 = j.at("v2").get<double>();
  s.lambda = j.at("lambda").get<double>();
  s.last_dhat = j.at("last_dhat").get<double>();

  if (s.theta.size() != fresh.theta.size() ||
      s.info.rows() != fresh.info.rows() || s.x_fc.size() != fresh.x_fc.size() ||
      s.dhat_history.size() != fresh.dhat_history.size() ||
      s.z_history.size() != fresh.z_history.size() ||
      s.abar_history.size() != fresh.abar_history.size()) {
    throw std::invalid_argument("AISE snapshot dimensions do not match config");
  }
  return est;
}

}  // namespace aisetraj
