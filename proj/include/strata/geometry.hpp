#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "strata/types.hpp"

namespace strata {

/// Parameterized interface curve on t in [0,1]. Periodic interfaces satisfy
/// eval(t+1) = eval(t) + (period, 0); closed test curves satisfy eval(t+1) = eval(t).
class Curve {
 public:
  virtual ~Curve() = default;
  virtual Point eval(double t) const = 0;
  virtual Point deriv(double t) const = 0;
};

/// y(t) = offset + scale * sum_j (a_j sin(2 pi j t) + b_j cos(2 pi j t)),
/// x(t) = period * (t - 1/2).
struct FourierCurveSpec {
  std::vector<double> sin_coeffs;
  std::vector<double> cos_coeffs;
  double scale = 1.0 / 60.0;
  double offset = 0.0;
  double period = 1.0;
};

class FourierCurve : public Curve {
 public:
  explicit FourierCurve(FourierCurveSpec spec) : spec_(std::move(spec)) {}
  Point eval(double t) const override;
  Point deriv(double t) const override;
  const FourierCurveSpec& spec() const { return spec_; }

 private:
  FourierCurveSpec spec_;
};

/// Arbitrary parameterization, used by tests and explicit-geometry configs.
class FunctionCurve : public Curve {
 public:
  using Fn = std::function<Point(double)>;
  FunctionCurve(Fn f, Fn df) : f_(std::move(f)), df_(std::move(df)) {}
  Point eval(double t) const override { return f_(t); }
  Point deriv(double t) const override { return df_(t); }

 private:
  Fn f_, df_;
};

Point eval_fourier_curve(const FourierCurveSpec& spec, double t);

/// Uniform [0,1) draws sorted in descending order; deterministic in the seed.
std::vector<double> sorted_random_coeffs(std::uint64_t seed, int count);

/// Dyadic panel refinement toward marked parameter values.
struct PanelPlan {
  std::vector<double> corners;
  int dyadic_levels = 0;
};

struct Panel {
  double t0, t1;
  int first_node, num_nodes;
};

struct DiscretizedInterface {
  std::shared_ptr<const Curve> curve;
  std::vector<Panel> panels;
  std::vector<double> t;        // parameter nodes
  std::vector<Point> pts;
  std::vector<Vec2> normals;    // unit, tangent rotated +90 deg (up for graphs)
  std::vector<double> speed;    // |gamma'(t_k)|
  std::vector<double> weights;  // parameter-space quadrature weights
  int n() const { return static_cast<int>(t.size()); }
  double arc_length() const;
  Point node_shifted(int k, double dx) const { return {pts[k].x + dx, pts[k].y}; }
};

DiscretizedInterface discretize_interface(std::shared_ptr<const Curve> curve, int n_points,
                                          const PanelPlan& plan = {});

struct AuxParams {
  int proxy_points = 160;  // P_l
  int wall_points = 120;   // M_w
  int top_points = 60;     // M
  int rb_terms = 20;       // K
};

struct Tolerances {
  double lowrank = 1e-10;
  double schur = 1e-12;
  double hbs = 1e-10;
};

struct ProblemSpec {
  double period = 1.0;
  std::vector<double> omega;                           // I+1 wavenumbers, top first
  std::vector<std::shared_ptr<const Curve>> interfaces;  // I curves, top first
  std::vector<int> n_points;                           // per interface
  std::vector<PanelPlan> panel_plans;                  // optional, per interface
  AuxParams aux;
  Tolerances tol;
  bool dense_fallback = false;
  int num_layers() const { return static_cast<int>(omega.size()); }
  int num_interfaces() const { return static_cast<int>(interfaces.size()); }
  void validate() const;
};

struct ProxyCircle {
  Point center;
  double radius = 0.0;
  std::vector<Point> pts;
};

struct WallSegment {
  double y_lo = 0.0, y_hi = 0.0;
  std::vector<double> y;  // M_w Gauss-Legendre ordinates shared by both walls
};

struct UnitCell {
  double x_left = 0.0, x_right = 0.0;
  double y_up = 0.0, y_down = 0.0;
  std::vector<WallSegment> wall;       // one per layer
  std::vector<double> top_x, bottom_x;  // M collocation abscissas each
  std::vector<ProxyCircle> proxy;      // one per layer
};

UnitCell build_unit_cell(const ProblemSpec& spec,
                         const std::vector<DiscretizedInterface>& interfaces);

/// Discretized problem: interfaces plus the cell scaffolding.
struct Geometry {
  ProblemSpec spec;
  std::vector<DiscretizedInterface> interfaces;
  UnitCell cell;
};

Geometry build_geometry(const ProblemSpec& spec);

}  // namespace strata
