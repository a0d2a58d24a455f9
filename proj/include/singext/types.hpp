#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace singext {

// Ambient points live in at most R^8, chart parameters in at most R^2.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;
using Params = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;
// Columns are tangent vectors.
using Frame = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 2>;
using Metric = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

inline Point make_point(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

inline Params make_params(std::initializer_list<double> xs) {
  Params p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

// Wraps an angle into [0, 2*pi).
inline double wrap_angle(double a) {
  double r = std::fmod(a, 2.0 * kPi);
  if (r < 0) r += 2.0 * kPi;
  if (r >= 2.0 * kPi) r = 0.0;
  return r;
}

}  // namespace singext
