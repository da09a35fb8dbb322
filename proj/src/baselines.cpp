#include "aisetraj/baselines.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "aisetraj/integrator.hpp"

namespace aisetraj {

double Biquad::process(double x) {
  const double y = b[0] * x + s1;
  s1 = b[1] * x - a[1] * y + s2;
  s2 = b[2] * x - a[2] * y;
  return y;
}

void Biquad::prime(double x) {
  const double gain = (b[0] + b[1] + b[2]) / (a[0] + a[1] + a[2]);
  const double y = gain * x;
  s2 = b[2] * x - a[2] * y;
  s1 = b[1] * x - a[1] * y + s2;
}

ButterworthCascade::ButterworthCascade(int order, double cutoff)
    : order_(order), cutoff_(cutoff) {
  if (order < 2 || order % 2 != 0) {
    throw std::invalid_argument("Butterworth order must be even and >= 2");
  }
  if (!(cutoff > 0.0 && cutoff < std::numbers::pi)) {
    throw std::invalid_argument("Butterworth cutoff must lie in (0, pi)");
  }
  // Bilinear map s = (1 - z^-1) / (1 + z^-1); prewarped analog cutoff.
  const double wc = std::tan(cutoff / 2.0);
  const double wc2 = wc * wc;
  for (int k = 0; k < order / 2; ++k) {
    const double theta =
        std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
    const double re = wc * std::cos(theta);  // pole real part, negative
    const double a0 = 1.0 - 2.0 * re + wc2;
    Biquad q;
    q.b = {wc2 / a0, 2.0 * wc2 / a0, wc2 / a0};
    q.a = {1.0, (2.0 * wc2 - 2.0) / a0, (1.0 + 2.0 * re + wc2) / a0};
    sections_.push_back(q);
  }
}

double ButterworthCascade::process(double x) {
  if (!primed_) {
    double v = x;
    for (auto& s : sections_) {
      s.prime(v);
      v = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]) * v;
    }
    primed_ = true;
  }
  for (auto& s : sections_) x = s.process(x);
  return x;
}

void ButterworthCascade::reset() {
  for (auto& s : sections_) s.s1 = s.s2 = 0.0;
  primed_ = false;
}

std::complex<double> ButterworthCascade::response(double omega) const {
  const std::complex<double> zi = std::polar(1.0, -omega);
  std::complex<double> h = 1.0;
  for (const auto& s : sections_) {
    h *= (s.b[0] + zi * (s.b[1] + zi * s.b[2])) /
         (s.a[0] + zi * (s.a[1] + zi * s.a[2]));
  }
  return h;
}

BdbDifferentiator::BdbDifferentiator(int order, double cutoff,
                                     double sample_time)
    : filter_(order, cutoff), ts_(sample_time) {
  if (!(sample_time > 0.0)) {
    throw std::invalid_argument("sample time must be positive");
  }
}

DerivativeTriple BdbDifferentiator::step(double p) {
  const double y = filter_.process(p);
  if (!started_) {
    hist_.fill(y);
    started_ = true;
  }
  hist_ = {y, hist_[0], hist_[1], hist_[2]};
  DerivativeTriple d;
  d.v = (hist_[0] - hist_[1]) / ts_;
  d.a = (hist_[0] - 2.0 * hist_[1] + hist_[2]) / (ts_ * ts_);
  d.j = (hist_[0] - 3.0 * hist_[1] + 3.0 * hist_[2] - hist_[3]) /
        (ts_ * ts_ * ts_);
  return d;
}

AbgGains abg_gains(double tracking_index, double sample_time) {
  if (!(tracking_index > 0.0)) {
    throw std::invalid_argument("tracking index must be positive");
  }
  const SystemMatrices sys = build_integrator(3, sample_time);
  const Eigen::Matrix3d a = sys.A;
  const Eigen::Vector3d b = sys.B;
  const Eigen::RowVector3d c = sys.C;
  const double sigma_w = tracking_index / (sample_time * sample_time);
  const Eigen::Matrix3d q = sigma_w * sigma_w * b * b.transpose();

  // Forecast-covariance Riccati recursion with unit measurement variance.
  Eigen::Matrix3d p = q;
  Eigen::Vector3d k = Eigen::Vector3d::Zero();
  constexpr int kMaxIterations = 1'000'000;
  for (int it = 0; it < kMaxIterations; ++it) {
    k = p * c.transpose() / (c * p * c.transpose() + 1.0);
    Eigen::Matrix3d next = a * (p - k * c * p) * a.transpose() + q;
    next = 0.5 * (next + next.transpose());
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change < 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff())) {
      k = p * c.transpose() / (c * p * c.transpose() + 1.0);
      return {k(0), k(1) * sample_time,
              k(2) * sample_time * sample_time / 2.0};
    }
  }
  throw std::runtime_error("ABG Riccati recursion did not converge");
}

Eigen::Matrix3d abg_error_dynamics(const AbgGains& g, double sample_time) {
  const SystemMatrices sys = build_integrator(3, sample_time);
  const Eigen::Vector3d k(g.alpha, g.beta / sample_time,
                          2.0 * g.gamma / (sample_time * sample_time));
  return sys.A * (Eigen::Matrix3d::Identity() - k * sys.C);
}

AbgFilter::AbgFilter(AbgGains gains, double sample_time)
    : gains_(gains), ts_(sample_time) {
  if (!(sample_time > 0.0)) {
    throw std::invalid_argument("sample time must be positive");
  }
}

Eigen::Vector3d AbgFilter::step(double p) {
  if (!started_) {
    x_ = Eigen::Vector3d(p, 0.0, 0.0);
    started_ = true;
    return x_;
  }
  const double t = ts_;
  const Eigen::Vector3d pred(x_(0) + t * x_(1) + 0.5 * t * t * x_(2),
                             x_(1) + t * x_(2), x_(2));
  const double r = p - pred(0);
  x_(0) = pred(0) + gains_.alpha * r;
  x_(1) = pred(1) + gains_.beta / t * r;
  x_(2) = pred(2) + 2.0 * gains_.gamma / (t * t) * r;
  return x_;
}

}  // namespace aisetraj
