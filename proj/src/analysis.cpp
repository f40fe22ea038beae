#include "strata/analysis.hpp"

#include <cmath>
#include <limits>

namespace strata {

std::vector<BraggOrder> bragg_orders(double kappa0, double omega, double period, int terms) {
  std::vector<BraggOrder> out;
  for (int n = -terms; n <= terms; ++n) {
    BraggOrder o;
    o.n = n;
    o.kappa_n = kappa0 + 2.0 * kPi * n / period;
    const double disc = omega * omega - o.kappa_n * o.kappa_n;
    o.k_n = (disc >= 0.0) ? Cplx(std::sqrt(disc), 0.0) : Cplx(0.0, std::sqrt(-disc));
    o.wood = std::abs(o.k_n) < 1e-8 * omega;
    o.propagating = disc > 0.0 && !o.wood;
    out.push_back(o);
  }
  return out;
}

double flux_error(const ScatteringSolution& sol) {
  const double k_inc = sol.wave.k_inc;
  double sum = 0.0;
  const int terms = static_cast<int>(sol.a_up.size() - 1) / 2;
  const auto up = bragg_orders(sol.kappa0, sol.omega_top, sol.period, terms);
  for (std::size_t i = 0; i < up.size(); ++i)
    if (up[i].propagating) sum += up[i].k_n.real() / k_inc * std::norm(sol.a_up[i]);
  const auto down = bragg_orders(sol.kappa0, sol.omega_bottom, sol.period, terms);
  for (std::size_t i = 0; i < down.size(); ++i)
    if (down[i].propagating) sum += down[i].k_n.real() / k_inc * std::norm(sol.a_down[i]);
  return std::abs(1.0 - sum);
}

namespace {

double interface_height_at(const Curve& c, double period, double x_in) {
  double t = x_in / period + 0.5;
  t -= std::floor(t);
  return c.eval(t).y;
}

}  // namespace

FieldEval evaluate_field(const Geometry& geo, const ScatteringSolution& sol,
                         const std::vector<Point>& pts) {
  const ProblemSpec& spec = geo.spec;
  const double d = spec.period;
  const int num_if = spec.num_interfaces();
  const Cplx alpha = sol.wave.alpha;
  FieldEval out;
  out.values = CVec::Zero(pts.size());
  out.flagged.assign(pts.size(), false);

  const RayleighBlochBasis rb_up = make_rb_basis(sol.kappa0, sol.omega_top, d, spec.aux.rb_terms,
                                                 geo.cell.y_up, RbDirection::Up);
  const RayleighBlochBasis rb_down = make_rb_basis(sol.kappa0, sol.omega_bottom, d,
                                                   spec.aux.rb_terms, geo.cell.y_down,
                                                   RbDirection::Down);

  for (std::size_t m = 0; m < pts.size(); ++m) {
    const double shift = std::floor((pts[m].x + 0.5 * d) / d);
    const Point p(pts[m].x - shift * d, pts[m].y);
    const Cplx phase = std::pow(alpha, shift);

    if (p.y >= geo.cell.y_up) {
      Cplx v = sol.wave.value(p);
      for (int i = 0; i < rb_up.size(); ++i) v += sol.a_up[i] * rb_up.mode(i, p);
      out.values[m] = phase * v;
      continue;
    }
    if (p.y <= geo.cell.y_down) {
      Cplx v = 0.0;
      for (int i = 0; i < rb_down.size(); ++i) v += sol.a_down[i] * rb_down.mode(i, p);
      out.values[m] = phase * v;
      continue;
    }

    int layer = 0;
    for (int i = 0; i < num_if; ++i)
      if (p.y < interface_height_at(*spec.interfaces[i], d, p.x)) layer = i + 1;

    // Exclusion band: 3 local node spacings from an adjacent interface.
    bool masked = false;
    for (int i : {layer - 1, layer}) {
      if (i < 0 || i >= num_if) continue;
      const DiscretizedInterface& di = geo.interfaces[i];
      for (int k = 0; k < di.n(); ++k) {
        const double h = di.weights[k] * di.speed[k];
        for (int c = -1; c <= 1; ++c)
          if (dist(p, di.node_shifted(k, c * d)) < 3.0 * h) {
            masked = true;
            break;
          }
        if (masked) break;
      }
      if (masked) break;
    }
    if (masked) {
      out.values[m] = Cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
      out.flagged[m] = true;
      continue;
    }

    Cplx v = (layer == 0) ? sol.wave.value(p) : Cplx(0.0);
    const std::vector<Point> one{p};
    for (int i : {layer - 1, layer}) {
      if (i < 0 || i >= num_if) continue;
      const Cplx copy_phase[3] = {Cplx(1.0), alpha, 1.0 / alpha};
      const double shifts[3] = {0.0, d, -d};
      for (int c = 0; c < 3; ++c)
        v += copy_phase[c] * potential_values(spec.omega[layer], geo.interfaces[i], shifts[c],
                                              sol.sigma[i], one)[0];
    }
    v += proxy_values(spec.omega[layer], geo.cell.proxy[layer], sol.proxy_c[layer], one)[0];
    out.values[m] = phase * v;
  }
  return out;
}

std::vector<ConvergenceRow> convergence_study(ProblemSpec spec, const std::vector<int>& n_list,
                                              double theta) {
  std::vector<ConvergenceRow> rows;
  for (int n : n_list) {
    for (auto& np : spec.n_points) np = n;
    SolverState state = SolverState::build(spec);
    const ScatteringSolution sol = state.solve(theta);
    rows.push_back({n, sol.flux_error, state.timings()});
  }
  return rows;
}

}  // namespace strata
