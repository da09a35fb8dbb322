#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace aisetraj {

// Skew-symmetric matrix with hat(w) * v = w x v.
Eigen::Matrix3d hat(const Eigen::Vector3d& w);

// exp(hat(phi)) in closed form; cubic series below |phi| = 1e-4.
Eigen::Matrix3d gamma0(const Eigen::Vector3d& phi);

// (1/Ts) * integral_0^Ts exp(hat(omega) t) dt evaluated at phi = omega * Ts,
// i.e. the left Jacobian of SO(3). Quadratic series below |phi| = 1e-4.
Eigen::Matrix3d gamma1(const Eigen::Vector3d& phi);

inline constexpr double kSmallAngle = 1e-4;
inline constexpr double kSpeedTolerance = 1e-9;
inline constexpr double kCurvatureTolerance = 1e-12;

// Tangent, normal and binormal as the columns of a rotation matrix.
// Returns nullopt when |v| <= 1e-9 or |v x a| <= 1e-12 * max(1, |v||a|).
std::optional<Eigen::Matrix3d> frame_from_derivatives(const Eigen::Vector3d& v,
                                                      const Eigen::Vector3d& a);

struct ScalarParams {
  double u = 0.0;        // speed
  double kappa_t = 0.0;  // curvature per unit length
  double tau_t = 0.0;    // torsion per unit length
};

// u = |v|, kappa~ = |v x a| / |v|^3, tau~ = v.(a x j) / |v x a|^2.
// Same degeneracy rule as frame_from_derivatives.
std::optional<ScalarParams> scalar_params(const Eigen::Vector3d& v,
                                          const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& j);

struct FrenetModel {
  Eigen::Matrix3d R;  // [T N B]
  double u = 0.0;
  double kappa_t = 0.0;
  double tau_t = 0.0;
  Eigen::Vector3d omega;  // [u tau~, 0, u kappa~]
};

std::optional<FrenetModel> frenet_model(const Eigen::Vector3d& v,
                                        const Eigen::Vector3d& a,
                                        const Eigen::Vector3d& j);

// Nearest rotation in the Frobenius norm.
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m);

// Positions p_{k+1} .. p_{k+horizon} propagated with constant omega and u:
//   R_{k+l} = R_k Gamma0^l
//   p_{k+l} = p_k + Ts (R_k + sum_{i=1}^{l-1} R_{k+i}) Gamma1 [u 0 0]'
// The propagated frame is re-projected onto SO(3) every 64 steps.
std::vector<Eigen::Vector3d> fs_predict(const Eigen::Vector3d& p,
                                        const FrenetModel& model, int horizon,
                                        double sample_time);

}  // namespace aisetraj
