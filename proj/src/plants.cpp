#include "preftune/plants.hpp"

#include <cmath>
#include <string>

#include "preftune/errors.hpp"

namespace preftune {

void CstrParams::validate() const {
  for (double v : {F_over_V, k0, H, E, rhoCp, US_over_V, Tc0, R}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("CSTR parameters must be positive and finite");
  }
}

double arrhenius_rate(double T, double CA, const CstrParams& p) {
  if (!(T > 0.0)) throw DomainError("Arrhenius rate needs T > 0");
  return p.k0 * std::exp(-p.E / (p.R * T)) * CA;
}

CstrDerivatives cstr_derivatives(const CstrState& s, const CstrInputs& in, const CstrParams& p) {
  const double r = arrhenius_rate(s.T, s.CA, p);
  CstrDerivatives d;
  d.dT_dt = p.F_over_V * (in.Tf - s.T) + (p.H / p.rhoCp) * r - (p.US_over_V / p.rhoCp) * (s.T - in.Tc);
  d.dCA_dt = p.F_over_V * (in.CAf - s.CA) - r;
  return d;
}

CstrEquilibrium cstr_equilibrium(double CA_target, const CstrInputs& in, const CstrParams& p) {
  if (!(CA_target > 0.0) || !(CA_target < in.CAf)) {
    throw EquilibriumError("equilibrium needs 0 < CA < CAf (got CA = " + std::to_string(CA_target) + ")");
  }
  // g(T) = F/V (CAf - CA) - r(T, CA) is strictly decreasing in T.
  auto g = [&](double T) { return p.F_over_V * (in.CAf - CA_target) - arrhenius_rate(T, CA_target, p); };
  double lo = 150.0;
  double hi = 700.0;
  if (!(g(lo) > 0.0 && g(hi) < 0.0)) throw EquilibriumError("no equilibrium temperature in [150, 700] K");
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  CstrEquilibrium eq;
  eq.T = std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
  const double r = arrhenius_rate(eq.T, CA_target, p);
  const double k = p.US_over_V / p.rhoCp;
  eq.Tc = eq.T - (p.F_over_V * (in.Tf - eq.T) + (p.H / p.rhoCp) * r) / k;

  CstrInputs at = in;
  at.Tc = eq.Tc;
  const CstrDerivatives d = cstr_derivatives({eq.T, CA_target}, at, p);
  if (std::abs(d.dT_dt) > 1e-9 || std::abs(d.dCA_dt) > 1e-9) {
    throw EquilibriumError("equilibrium residual above 1e-9");
  }
  return eq;
}

BicycleDerivatives bicycle_derivatives(const BicycleState& s, const BicycleInputs& in, const BicycleParams& p) {
  const double heading = s.yaw + in.delta_s;
  return {in.v * std::cos(heading), in.v * std::sin(heading), in.v * std::sin(in.delta_s) / p.L};
}

Vec rk4_step(const VectorField& f, const Vec& x, const Vec& u, double h) {
  if (!(h > 0.0)) throw ArgumentError("rk4_step needs h > 0");
  const Vec k1 = f(x, u);
  if (!k1.allFinite()) throw IntegrationError("non-finite derivative in RK4 stage 1");
  const Vec k2 = f(x + 0.5 * h * k1, u);
  if (!k2.allFinite()) throw IntegrationError("non-finite derivative in RK4 stage 2");
  const Vec k3 = f(x + 0.5 * h * k2, u);
  if (!k3.allFinite()) throw IntegrationError("non-finite derivative in RK4 stage 3");
  const Vec k4 = f(x + h * k3, u);
  if (!k4.allFinite()) throw IntegrationError("non-finite derivative in RK4 stage 4");
  Vec next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw IntegrationError("non-finite RK4 result");
  return next;
}

VectorField cstr_field(const CstrParams& p, double Tf, double CAf) {
  return [p, Tf, CAf](const Vec& x, const Vec& u) {
    const CstrDerivatives d = cstr_derivatives({x(0), x(1)}, {u(0), Tf, CAf}, p);
    Vec out(2);
    out << d.dT_dt, d.dCA_dt;
    return out;
  };
}

VectorField bicycle_field(const BicycleParams& p) {
  return [p](const Vec& x, const Vec& u) {
    const BicycleDerivatives d = bicycle_derivatives({x(0), x(1), x(2)}, {u(0), u(1)}, p);
    Vec out(3);
    out << d.dx_f, d.dy_f, d.dyaw;
    return out;
  };
}

}  // namespace preftune
