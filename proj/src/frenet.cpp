#include "aisetraj/frenet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aisetraj {

Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Eigen::Matrix3d gamma0(const Eigen::Vector3d& phi) {
  const double th = phi.norm();
  const Eigen::Matrix3d w = hat(phi);
  const Eigen::Matrix3d w2 = w * w;
  if (th < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + w + 0.5 * w2 + (w2 * w) / 6.0;
  }
  return Eigen::Matrix3d::Identity() + std::sin(th) / th * w +
         (1.0 - std::cos(th)) / (th * th) * w2;
}

Eigen::Matrix3d gamma1(const Eigen::Vector3d& phi) {
  const double th = phi.norm();
  const Eigen::Matrix3d w = hat(phi);
  const Eigen::Matrix3d w2 = w * w;
  if (th < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + 0.5 * w + w2 / 6.0;
  }
  return Eigen::Matrix3d::Identity() + (1.0 - std::cos(th)) / (th * th) * w +
         (th - std::sin(th)) / (th * th * th) * w2;
}

namespace {

bool degenerate(const Eigen::Vector3d& v, const Eigen::Vector3d& a,
                const Eigen::Vector3d& vxa) {
  const double speed = v.norm();
  if (!(speed > kSpeedTolerance)) return true;
  return !(vxa.norm() >
           kCurvatureTolerance * std::max(1.0, speed * a.norm()));
}

}  // namespace

std::optional<Eigen::Matrix3d> frame_from_derivatives(const Eigen::Vector3d& v,
                                                      const Eigen::Vector3d& a) {
  const Eigen::Vector3d vxa = v.cross(a);
  if (degenerate(v, a, vxa)) return std::nullopt;
  Eigen::Matrix3d r;
  r.col(0) = v / v.norm();
  r.col(1) = v.cross(a.cross(v)) / (v.norm() * vxa.norm());
  r.col(2) = vxa / vxa.norm();
  return r;
}

std::optional<ScalarParams> scalar_params(const Eigen::Vector3d& v,
                                          const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& j) {
  const Eigen::Vector3d vxa = v.cross(a);
  if (degenerate(v, a, vxa)) return std::nullopt;
  const double u = v.norm();
  ScalarParams s;
  s.u = u;
  s.kappa_t = vxa.norm() / (u * u * u);
  s.tau_t = v.dot(a.cross(j)) / vxa.squaredNorm();
  return s;
}

std::optional<FrenetModel> frenet_model(const Eigen::Vector3d& v,
                                        const Eigen::Vector3d& a,
                                        const Eigen::Vector3d& j) {
  auto frame = frame_from_derivatives(v, a);
  auto params = scalar_params(v, a, j);
  if (!frame || !params) return std::nullopt;
  FrenetModel m;
  m.R = *frame;
  m.u = params->u;
  m.kappa_t = params->kappa_t;
  m.tau_t = params->tau_t;
  m.omega = Eigen::Vector3d(m.u * m.tau_t, 0.0, m.u * m.kappa_t);
  return m;
}

Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

std::vector<Eigen::Vector3d> fs_predict(const Eigen::Vector3d& p,
                                        const FrenetModel& model, int horizon,
                                        double sample_time) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const Eigen::Vector3d phi = model.omega * sample_time;
  const Eigen::Matrix3d g0 = gamma0(phi);
  const Eigen::Vector3d step_body =
      sample_time * gamma1(phi) * Eigen::Vector3d(model.u, 0.0, 0.0);

  std::vector<Eigen::Vector3d> out;
  out.reserve(horizon);
  Eigen::Matrix3d r = model.R;
  Eigen::Vector3d pos = p;
  for (int l = 1; l <= horizon; ++l) {
    // p_{k+l} = p_{k+l-1} + Ts R_{k+l-1} Gamma1 [u 0 0]'
    pos += r * step_body;
    out.push_back(pos);
    r = r * g0;
    if (l % 64 == 0) r = project_to_rotation(r);
  }
  return out;
}

}  // namespace aisetraj
