#pragma once

#include <Eigen/Dense>

namespace aisetraj {

// Discrete-time integrator chain x_{k+1} = A x_k + B d_k, y_k = C x_k.
// The state is ordered (position-like, ..., highest-derivative-like), so C
// picks out the first component and d_k is the order-th derivative of y.
struct SystemMatrices {
  int order = 1;
  double sample_time = 0.0;
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  Eigen::RowVectorXd C;

  int dim() const { return order; }
};

// Throws std::invalid_argument for order outside {1,2,3} or sample_time <= 0.
SystemMatrices build_integrator(int order, double sample_time);

}  // namespace aisetraj
