#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aisetraj {

struct TruthSample {
  std::int64_t k = 0;
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  Eigen::Vector3d j = Eigen::Vector3d::Zero();
};

// p = [400 t, 400 t - 9.8 t^2 / 2, 0]
TruthSample parabolic(std::int64_t k, double sample_time);

// p = [20 sin(0.5 t), 20 cos(0.5 t), t]
TruthSample helical(std::int64_t k, double sample_time);

// Standard normal draws from mt19937_64 via the Box-Muller transform. Both
// are fully specified, so a seed yields the same stream on every platform,
// unlike std::normal_distribution whose algorithm is implementation-defined.
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed) : engine_(seed) {}
  double next();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Adds N(0, sigma^2) to the first `axes` components; sigma == 0 returns p.
Eigen::Vector3d add_noise(const Eigen::Vector3d& p, double sigma,
                          GaussianNoise& noise, int axes = 3);

struct PositionSeries {
  double sample_time = 0.0;
  std::vector<double> t;
  std::vector<Eigen::Vector3d> p;
};

// Reads CSV with header `t,x,y,z`. Times must increase with uniform spacing
// (tolerance 1e-9 s). Errors are std::runtime_error naming the line.
PositionSeries read_position_csv(std::istream& in);
PositionSeries read_position_csv(const std::string& path);

// Header t,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz.
void write_truth_csv(std::ostream& out, const std::vector<TruthSample>& truth);

}  // namespace aisetraj
