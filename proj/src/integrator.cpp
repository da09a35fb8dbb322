#include "aisetraj/integrator.hpp"

#include <stdexcept>
#include <string>

namespace aisetraj {

SystemMatrices build_integrator(int order, double sample_time) {
  if (order < 1 || order > 3) {
    throw std::invalid_argument("integrator order must be 1, 2 or 3 (got " +
                                std::to_string(order) + ")");
  }
  if (!(sample_time > 0.0)) {
    throw std::invalid_argument("sample time must be positive");
  }

  SystemMatrices sys;
  sys.order = order;
  sys.sample_time = sample_time;

  const int n = order;
  sys.A = Eigen::MatrixXd::Identity(n, n);
  sys.B = Eigen::VectorXd::Zero(n);
  sys.C = Eigen::RowVectorXd::Zero(n);
  sys.C(0) = 1.0;

  // A(r, c) = Ts^(c-r) / (c-r)!, B(r) = Ts^(n-r) / (n-r)!
  auto taylor = [sample_time](int p) {
    double v = 1.0;
    for (int i = 1; i <= p; ++i) v *= sample_time / i;
    return v;
  };
  for (int r = 0; r < n; ++r) {
    for (int c = r + 1; c < n; ++c) sys.A(r, c) = taylor(c - r);
    sys.B(r) = taylor(n - r);
  }
  return sys;
}

}  // namespace aisetraj
