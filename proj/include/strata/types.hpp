#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace strata {

using Cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr Cplx kI{0.0, 1.0};

struct Point {
  double x = 0.0;
  double y = 0.0;
  Point() = default;
  Point(double x_, double y_) : x(x_), y(y_) {}
  Point operator+(const Point& o) const { return {x + o.x, y + o.y}; }
  Point operator-(const Point& o) const { return {x - o.x, y - o.y}; }
  double norm() const { return std::hypot(x, y); }
};

inline double dist(const Point& a, const Point& b) { return (a - b).norm(); }

/// Thrown on invalid problem setup (bad geometry, bad config values).
struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical step cannot proceed (singular pivot, degenerate block).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace strata
