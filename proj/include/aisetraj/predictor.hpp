#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace aisetraj {

enum class Method { AiseVa, AiseFs, BdbVa, AbgVa };

// Display tag ("AISE/va", ...) and command-line name ("aise-va", ...).
std::string_view method_tag(Method m);
std::string_view method_name(Method m);
// Accepts either form. Throws std::invalid_argument on anything else.
Method parse_method(std::string_view s);
bool uses_frenet(Method m);

struct DerivativeEstimate {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  std::optional<Eigen::Vector3d> j;
};

struct PredictionTrace {
  std::int64_t anchor = 0;
  int horizon = 0;
  Method method = Method::AiseVa;
  std::vector<Eigen::Vector3d> positions;  // p_{k+1} .. p_{k+horizon}
  bool fallback_used = false;
};

// p_{k+l} = p_k + l Ts v + (l Ts)^2 / 2 a for l = 1..horizon.
std::vector<Eigen::Vector3d> va_predict(const Eigen::Vector3d& p,
                                        const Eigen::Vector3d& v,
                                        const Eigen::Vector3d& a, int horizon,
                                        double sample_time);

// Frenet methods fall back to va_predict when the geometry is degenerate.
// Throws std::invalid_argument if a Frenet method is given no jerk.
PredictionTrace predict(Method method, std::int64_t anchor,
                        const Eigen::Vector3d& p,
                        const DerivativeEstimate& est, int horizon,
                        double sample_time);

}  // namespace aisetraj
