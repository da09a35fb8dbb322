#include "aisetraj/predictor.hpp"

#include <stdexcept>

#include "aisetraj/frenet.hpp"

namespace aisetraj {

namespace {

struct MethodNames {
  Method method;
  std::string_view tag;
  std::string_view name;
};

constexpr MethodNames kMethods[] = {
    {Method::AiseVa, "AISE/va", "aise-va"},
    {Method::AiseFs, "AISE/FS", "aise-fs"},
    {Method::BdbVa, "BDB/va", "bdb-va"},
    {Method::AbgVa, "ABG/va", "abg-va"},
};

}  // namespace

std::string_view method_tag(Method m) {
  for (const auto& e : kMethods) {
    if (e.method == m) return e.tag;
  }
  return "?";
}

std::string_view method_name(Method m) {
  for (const auto& e : kMethods) {
    if (e.method == m) return e.name;
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (const auto& e : kMethods) {
    if (s == e.tag || s == e.name) return e.method;
  }
  throw std::invalid_argument("unknown method: " + std::string(s));
}

bool uses_frenet(Method m) { return m == Method::AiseFs; }

std::vector<Eigen::Vector3d> va_predict(const Eigen::Vector3d& p,
                                        const Eigen::Vector3d& v,
                                        const Eigen::Vector3d& a, int horizon,
                                        double sample_time) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  std::vector<Eigen::Vector3d> out;
  out.reserve(horizon);
  for (int l = 1; l <= horizon; ++l) {
    const double t = l * sample_time;
    out.push_back(p + t * v + 0.5 * t * t * a);
  }
  return out;
}

PredictionTrace predict(Method method, std::int64_t anchor,
                        const Eigen::Vector3d& p,
                        const DerivativeEstimate& est, int horizon,
                        double sample_time) {
  PredictionTrace trace;
  trace.anchor = anchor;
  trace.horizon = horizon;
  trace.method = method;
  if (uses_frenet(method)) {
    if (!est.j) {
      throw std::invalid_argument("Frenet prediction requires a jerk estimate");
    }
    if (auto model = frenet_model(est.v, est.a, *est.j)) {
      trace.positions = fs_predict(p, *model, horizon, sample_time);
      return trace;
    }
    trace.fallback_used = true;
  }
  trace.positions = va_predict(p, est.v, est.a, horizon, sample_time);
  return trace;
}

}  // namespace aisetraj
