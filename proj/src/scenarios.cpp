#include "aisetraj/scenarios.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "aisetraj/text.hpp"

namespace aisetraj {

TruthSample parabolic(std::int64_t k, double sample_time) {
  constexpr double kSpeed = 400.0;
  constexpr double kGravity = 9.8;
  TruthSample s;
  s.k = k;
  s.t = static_cast<double>(k) * sample_time;
  const double t = s.t;
  s.p = {kSpeed * t, kSpeed * t - 0.5 * kGravity * t * t, 0.0};
  s.v = {kSpeed, kSpeed - kGravity * t, 0.0};
  s.a = {0.0, -kGravity, 0.0};
  return s;
}

TruthSample helical(std::int64_t k, double sample_time) {
  constexpr double kRadius = 20.0;
  constexpr double kRate = 0.5;
  TruthSample s;
  s.k = k;
  s.t = static_cast<double>(k) * sample_time;
  const double sn = std::sin(kRate * s.t);
  const double cs = std::cos(kRate * s.t);
  const double r1 = kRadius * kRate;
  const double r2 = r1 * kRate;
  const double r3 = r2 * kRate;
  s.p = {kRadius * sn, kRadius * cs, s.t};
  s.v = {r1 * cs, -r1 * sn, 1.0};
  s.a = {-r2 * sn, -r2 * cs, 0.0};
  s.j = {-r3 * cs, r3 * sn, 0.0};
  return s;
}

double GaussianNoise::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Uniforms on (0, 1] from the top 53 bits.
  constexpr double kScale = 1.0 / 9007199254740992.0;
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * kScale;
  const double u2 = static_cast<double>(engine_() >> 11) * kScale;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

Eigen::Vector3d add_noise(const Eigen::Vector3d& p, double sigma,
                          GaussianNoise& noise, int axes) {
  if (sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
  Eigen::Vector3d out = p;
  if (sigma == 0.0) return out;
  for (int i = 0; i < axes; ++i) out(i) += sigma * noise.next();
  return out;
}

PositionSeries read_position_csv(std::istream& in) {
  PositionSeries series;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + msg);
  };
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (!header) {
      if (cells != std::vector<std::string>{"t", "x", "y", "z"}) {
        fail("expected header t,x,y,z");
      }
      header = true;
      continue;
    }
    if (cells.size() != 4) fail("expected 4 columns");
    double vals[4];
    for (int i = 0; i < 4; ++i) {
      if (!parse_double(cells[i], vals[i])) {
        fail("not a number: '" + cells[i] + "'");
      }
    }
    const double t = vals[0];
    if (!series.t.empty()) {
      const double dt = t - series.t.back();
      if (!(dt > 0.0)) fail("time must be strictly increasing");
      if (series.t.size() == 1) {
        series.sample_time = dt;
      } else if (std::abs(dt - series.sample_time) > 1e-9) {
        fail("non-uniform sample spacing");
      }
    }
    series.t.push_back(t);
    series.p.emplace_back(vals[1], vals[2], vals[3]);
  }
  if (!header) throw std::runtime_error("line 1: missing header t,x,y,z");
  if (series.t.size() < 2) {
    throw std::runtime_error("need at least two samples");
  }
  return series;
}

PositionSeries read_position_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_position_csv(in);
}

void write_truth_csv(std::ostream& out, const std::vector<TruthSample>& truth) {
  out << "t,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz\n";
  for (const auto& s : truth) {
    out << format_double(s.t);
    for (const auto* vec : {&s.p, &s.v, &s.a, &s.j}) {
      for (int i = 0; i < 3; ++i) out << ',' << format_double((*vec)(i));
    }
    out << '\n';
  }
}

}  // namespace aisetraj
