#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace aisetraj {

// One biquad in transposed direct form II, a0 normalized to 1.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};
  double s1 = 0.0;
  double s2 = 0.0;

  double process(double x);
  // Sets the delay line so that a constant input x is a fixed point.
  void prime(double x);
};

// Digital low-pass Butterworth filter as a cascade of second-order sections,
// designed from the analog prototype by the bilinear transform with cutoff
// prewarping. `cutoff` is in rad/sample, 0 < cutoff < pi.
class ButterworthCascade {
 public:
  ButterworthCascade(int order, double cutoff);

  int order() const { return order_; }
  double cutoff() const { return cutoff_; }
  const std::vector<Biquad>& sections() const { return sections_; }

  // The first call primes every section with its input so a constant stream
  // passes through without a transient.
  double process(double x);
  void reset();

  // H(e^{j omega}) of the designed coefficients.
  std::complex<double> response(double omega) const;

 private:
  int order_;
  double cutoff_;
  std::vector<Biquad> sections_;
  bool primed_ = false;
};

struct DerivativeTriple {
  double v = 0.0;
  double a = 0.0;
  double j = 0.0;
};

// Backward differences of the Butterworth-filtered signal. History before
// the first sample is taken equal to the first filtered sample.
class BdbDifferentiator {
 public:
  BdbDifferentiator(int order, double cutoff, double sample_time);

  DerivativeTriple step(double p);
  double filtered() const { return hist_[0]; }

 private:
  ButterworthCascade filter_;
  double ts_;
  std::array<double, 4> hist_{};  // newest first
  bool started_ = false;
};

struct AbgGains {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

// Steady-state Kalman gains of the constant-acceleration model driven by
// white jerk through B, with unit measurement variance and process standard
// deviation Gamma / Ts^2. Throws std::invalid_argument for Gamma <= 0 and
// std::runtime_error when the Riccati recursion fails to converge.
AbgGains abg_gains(double tracking_index, double sample_time);

// Error-dynamics matrix A (I - K C) of the filter with these gains.
Eigen::Matrix3d abg_error_dynamics(const AbgGains& gains, double sample_time);

class AbgFilter {
 public:
  AbgFilter(AbgGains gains, double sample_time);
  AbgFilter(double tracking_index, double sample_time)
      : AbgFilter(abg_gains(tracking_index, sample_time), sample_time) {}

  // Predict then correct with residual r = p - p_pred:
  //   p += alpha r, v += (beta / Ts) r, a += (2 gamma / Ts^2) r.
  // The first sample initializes the position with zero rates.
  Eigen::Vector3d step(double p);

  const AbgGains& gains() const { return gains_; }
  const Eigen::Vector3d& state() const { return x_; }
  void set_state(const Eigen::Vector3d& x) {
    x_ = x;
    started_ = true;
  }

 private:
  AbgGains gains_;
  double ts_;
  Eigen::Vector3d x_ = Eigen::Vector3d::Zero();
  bool started_ = false;
};

}  // namespace aisetraj
