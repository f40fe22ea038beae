#pragma once

#include <vector>

#include "strata/geometry.hpp"
#include "strata/special.hpp"
#include "strata/types.hpp"

namespace strata {

/// One target/source kernel block. Rows: potential value and its directional
/// derivative at the target. Columns: double-layer (tau) and single-layer
/// (sigma) source densities.
struct KernelBlock2 {
  Cplx d, s;    // value row
  Cplx dp, sp;  // derivative row (D', S')
};

/// Kernel evaluations for points off the source curve.
class PairKernel {
 public:
  virtual ~PairKernel() = default;
  virtual KernelBlock2 eval(const Point& x, const Vec2& dir, const Point& y,
                            const Vec2& ny) const = 0;
};

/// Layer potentials at a single wavenumber.
class HelmholtzKernel : public PairKernel {
 public:
  explicit HelmholtzKernel(double omega) : omega_(omega) {}
  KernelBlock2 eval(const Point& x, const Vec2& dir, const Point& y, const Vec2& ny) const override;
  double omega() const { return omega_; }

 private:
  double omega_;
};

/// Difference of layer-potential kernels at two wavenumbers with the
/// wavenumber-independent strong singularities cancelled analytically.
/// This is the kernel of the transmission blocks A^s and A^pm.
class TransmissionKernel : public PairKernel {
 public:
  TransmissionKernel(double omega_above, double omega_below)
      : wa_(omega_above), wb_(omega_below) {}
  KernelBlock2 eval(const Point& x, const Vec2& dir, const Point& y, const Vec2& ny) const override;
  double omega_above() const { return wa_; }
  double omega_below() const { return wb_; }

 private:
  double wa_, wb_;
};

/// Helmholtz point charge: value and directional derivative at the target.
struct PointSource {
  double omega;
  Cplx value(const Point& x, const Point& src) const;
  Cplx deriv(const Point& x, const Vec2& dir, const Point& src) const;
};

enum class RbDirection { Up, Down };

/// Rayleigh-Bloch expansion data for orders n in {-K..K}.
struct RayleighBlochBasis {
  double kappa0 = 0.0;
  double period = 1.0;
  double omega = 1.0;
  int terms = 20;  // K
  double y_ref = 0.0;
  RbDirection direction = RbDirection::Up;
  std::vector<double> kappa_n;  // size 2K+1, order n = -K..K
  std::vector<Cplx> k_n;        // vertical wavenumbers, Re >= 0, Im >= 0
  std::vector<bool> wood_flag;  // |k_n| < 1e-8 * omega
  int size() const { return 2 * terms + 1; }
  Cplx mode(int idx, const Point& p) const;          // basis function value
  Cplx mode_dy(int idx, const Point& p) const;       // its y-derivative
};

RayleighBlochBasis make_rb_basis(double kappa0, double omega, double period, int terms,
                                 double y_ref, RbDirection direction);

/// Basis evaluations on a horizontal collocation line. Returns M x (2K+1), or
/// 2M x (2K+1) with derivative rows appended when requested.
CMat rayleigh_bloch_block(const RayleighBlochBasis& basis, const std::vector<double>& x,
                          bool with_y_derivative);

struct IncidentWave {
  double theta = -kPi / 2;  // in (-pi, 0)
  double omega1 = 1.0;
  double kappa = 0.0;   // omega1 cos(theta)
  double k_inc = 1.0;   // -omega1 sin(theta) > 0
  Cplx alpha = 1.0;     // exp(i kappa d)
  Cplx value(const Point& p) const;
  Cplx grad_dot(const Vec2& dir, const Point& p) const;
};

IncidentWave make_incident(double theta, double omega1, double period);

struct BlochPhase {
  Cplx alpha;
  double kappa0;
  int order_shift;  // m with kappa = kappa0 + 2 pi m / d
};

BlochPhase bloch_phase(double theta, double omega1, double period);

/// Incident wave trace on an interface: values and normal derivatives.
void incident_trace(const IncidentWave& wave, const DiscretizedInterface& interface,
                    CVec& values, CVec& normal_derivs);

}  // namespace strata
