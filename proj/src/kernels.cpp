#include "strata/kernels.hpp"

#include <cmath>

namespace strata {

namespace {

constexpr double kSeriesSwitch = 4.0;  // use power series below this argument
constexpr double kTwoOverPi = 2.0 / kPi;

struct GeomFactors {
  double r;
  double rn_y;   // r_hat . n_y
  double rdir;   // r_hat . dir
  double ddotn;  // dir . n_y
};

GeomFactors geom(const Point& x, const Vec2& dir, const Point& y, const Vec2& ny) {
  const double rx = x.x - y.x, ry = x.y - y.y;
  const double r = std::hypot(rx, ry);
  return {r, (rx * ny(0) + ry * ny(1)) / r, (rx * dir(0) + ry * dir(1)) / r,
          dir(0) * ny(0) + dir(1) * ny(1)};
}

}  // namespace

KernelBlock2 HelmholtzKernel::eval(const Point& x, const Vec2& dir, const Point& y,
                                   const Vec2& ny) const {
  const GeomFactors g = geom(x, dir, y, ny);
  const double z = omega_ * g.r;
  const Cplx h0 = hankel_h0(z);
  const Cplx h1 = hankel_h1(z);
  const Cplx quarter_i = 0.25 * kI;
  const Cplx wh1 = omega_ * h1;
  const double a = g.rdir * g.rn_y;
  KernelBlock2 out;
  out.s = quarter_i * h0;
  out.d = quarter_i * wh1 * g.rn_y;
  out.sp = -quarter_i * wh1 * g.rdir;
  out.dp = quarter_i * (omega_ * omega_ * h0 * a + (wh1 / g.r) * (g.ddotn - 2.0 * a));
  return out;
}

namespace {

// H0(omega r) and the regular part of omega H1(omega r)/r, evaluated so that
// two-wavenumber differences stay accurate as r -> 0:
//   omega H1(omega r)/r = g1 - (2i/pi)/r^2   (last term wavenumber-free).
struct StableParts {
  Cplx g0;  // H0(omega r)
  Cplx g1;  // regular part of omega H1 / r
};

StableParts stable_parts(double omega, double r, double log_r) {
  const double z = omega * r;
  const double lw = std::log(0.5 * omega) + kEulerGamma;
  if (z <= kSeriesSwitch) {
    const BesselSeriesParts p = bessel_series_parts(z);
    StableParts sp;
    sp.g0 = p.j0 + kI * kTwoOverPi * ((log_r + lw) * p.j0 + p.s0);
    sp.g1 = omega * omega *
            (p.j1_over_z + kI * kTwoOverPi * ((log_r + lw) * p.j1_over_z - 0.25 * p.s1));
    return sp;
  }
  StableParts sp;
  sp.g0 = hankel_h0(z);
  sp.g1 = omega * hankel_h1(z) / r + kI * kTwoOverPi / (r * r);
  return sp;
}

}  // namespace

KernelBlock2 TransmissionKernel::eval(const Point& x, const Vec2& dir, const Point& y,
                                      const Vec2& ny) const {
  const GeomFactors g = geom(x, dir, y, ny);
  const double log_r = std::log(g.r);
  const StableParts pa = stable_parts(wa_, g.r, log_r);
  const StableParts pb = stable_parts(wb_, g.r, log_r);
  const Cplx quarter_i = 0.25 * kI;
  const Cplx d_h0 = pa.g0 - pb.g0;
  const Cplx d_w2h0 = wa_ * wa_ * pa.g0 - wb_ * wb_ * pb.g0;
  const Cplx d_wh1_over_r = pa.g1 - pb.g1;
  const double a = g.rdir * g.rn_y;
  KernelBlock2 out;
  out.s = quarter_i * d_h0;
  out.d = quarter_i * g.rn_y * g.r * d_wh1_over_r;
  out.sp = -quarter_i * g.rdir * g.r * d_wh1_over_r;
  out.dp = quarter_i * (a * d_w2h0 + (g.ddotn - 2.0 * a) * d_wh1_over_r);
  return out;
}

Cplx PointSource::value(const Point& x, const Point& src) const {
  return helmholtz_green(omega, x, src);
}

Cplx PointSource::deriv(const Point& x, const Vec2& dir, const Point& src) const {
  const double rx = x.x - src.x, ry = x.y - src.y;
  const double r = std::hypot(rx, ry);
  const Cplx h1 = hankel_h1(omega * r);
  // grad_x G = -(i/4) omega H1(omega r) r_hat
  return -0.25 * kI * omega * h1 * (rx * dir(0) + ry * dir(1)) / r;
}

RayleighBlochBasis make_rb_basis(double kappa0, double omega, double period, int terms,
                                 double y_ref, RbDirection direction) {
  RayleighBlochBasis b;
  b.kappa0 = kappa0;
  b.omega = omega;
  b.period = period;
  b.terms = terms;
  b.y_ref = y_ref;
  b.direction = direction;
  for (int n = -terms; n <= terms; ++n) {
    const double kn = kappa0 + 2.0 * kPi * n / period;
    const double disc = omega * omega - kn * kn;
    Cplx kv = (disc >= 0.0) ? Cplx(std::sqrt(disc), 0.0) : Cplx(0.0, std::sqrt(-disc));
    b.kappa_n.push_back(kn);
    b.k_n.push_back(kv);
    b.wood_flag.push_back(std::abs(kv) < 1e-8 * omega);
  }
  return b;
}

Cplx RayleighBlochBasis::mode(int idx, const Point& p) const {
  const double sgn = (direction == RbDirection::Up) ? 1.0 : -1.0;
  return std::exp(kI * (kappa_n[idx] * p.x) + kI * k_n[idx] * (sgn * (p.y - y_ref)));
}

Cplx RayleighBlochBasis::mode_dy(int idx, const Point& p) const {
  const double sgn = (direction == RbDirection::Up) ? 1.0 : -1.0;
  return sgn * kI * k_n[idx] * mode(idx, p);
}

CMat rayleigh_bloch_block(const RayleighBlochBasis& basis, const std::vector<double>& x,
                          bool with_y_derivative) {
  const int m = static_cast<int>(x.size());
  const int cols = basis.size();
  CMat out(with_y_derivative ? 2 * m : m, cols);
  const double sgn = (basis.direction == RbDirection::Up) ? 1.0 : -1.0;
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < m; ++i) {
      const Cplx v = std::exp(kI * basis.kappa_n[j] * x[i]);
      out(i, j) = v;
      if (with_y_derivative) out(m + i, j) = sgn * kI * basis.k_n[j] * v;
    }
  return out;
}

Cplx IncidentWave::value(const Point& p) const {
  return std::exp(kI * (kappa * p.x - k_inc * p.y));
}

Cplx IncidentWave::grad_dot(const Vec2& dir, const Point& p) const {
  return kI * (kappa * dir(0) - k_inc * dir(1)) * value(p);
}

IncidentWave make_incident(double theta, double omega1, double period) {
  if (theta <= -kPi || theta >= 0.0)
    throw SpecError("incident angle must lie in (-pi, 0)");
  IncidentWave w;
  w.theta = theta;
  w.omega1 = omega1;
  w.kappa = omega1 * std::cos(theta);
  w.k_inc = -omega1 * std::sin(theta);
  w.alpha = std::exp(kI * w.kappa * period);
  return w;
}

BlochPhase bloch_phase(double theta, double omega1, double period) {
  const double kappa = omega1 * std::cos(theta);
  long m = std::lround(kappa * period / (2.0 * kPi));
  double kappa0 = kappa - 2.0 * kPi * m / period;
  if (kappa0 <= -kPi / period) {
    m -= 1;
    kappa0 += 2.0 * kPi / period;
  }
  return {std::exp(kI * kappa * period), kappa0, static_cast<int>(m)};
}

void incident_trace(const IncidentWave& wave, const DiscretizedInterface& interface, CVec& values,
                    CVec& normal_derivs) {
  const int n = interface.n();
  values.resize(n);
  normal_derivs.resize(n);
  for (int k = 0; k < n; ++k) {
    values[k] = wave.value(interface.pts[k]);
    normal_derivs[k] = wave.grad_dot(interface.normals[k], interface.pts[k]);
  }
}

}  // namespace strata
