#pragma once

#include <functional>

#include "preftune/core.hpp"

namespace preftune {

// Continuous stirred tank reactor with an exothermic first-order reaction.
// Units: hours, K, kgmol/m^3, kcal.
struct CstrParams {
  double F_over_V = 1.0;
  double k0 = 3.49e7;
  double H = 5960.0;
  double E = 11843.0;
  double rhoCp = 500.0;
  double US_over_V = 150.0;
  double Tc0 = 298.0;
  double R = 1.987;

  void validate() const;
};

struct CstrState {
  double T = 0.0;
  double CA = 0.0;
};

struct CstrInputs {
  double Tc = 298.0;
  double Tf = 298.15;
  double CAf = 10.0;
};

struct CstrDerivatives {
  double dT_dt = 0.0;
  double dCA_dt = 0.0;
};

/// r = k0 exp(-E / (R T)) CA. Throws DomainError for T <= 0.
double arrhenius_rate(double T, double CA, const CstrParams& p);

/// Energy and material balances. The reaction heat enters with a positive
/// sign (the reaction heats the reactor).
CstrDerivatives cstr_derivatives(const CstrState& s, const CstrInputs& in, const CstrParams& p);

struct CstrEquilibrium {
  double T = 0.0;
  double Tc = 0.0;
};

/// Steady state with CA = CA_target: bisection on the material balance for T
/// in [150, 700] K, then the energy balance solved for Tc. Throws
/// EquilibriumError when no root is bracketed or the residual check fails.
CstrEquilibrium cstr_equilibrium(double CA_target, const CstrInputs& in, const CstrParams& p);

// Kinematic bicycle, reference point at the front axle.
struct BicycleParams {
  double L = 4.5;
};

struct BicycleState {
  double x_f = 0.0;
  double y_f = 0.0;
  double yaw = 0.0;
};

struct BicycleInputs {
  double v = 0.0;
  double delta_s = 0.0;
};

struct BicycleDerivatives {
  double dx_f = 0.0;
  double dy_f = 0.0;
  double dyaw = 0.0;
};

BicycleDerivatives bicycle_derivatives(const BicycleState& s, const BicycleInputs& in, const BicycleParams& p);

/// dx/dt = f(x, u) on plain vectors.
using VectorField = std::function<Vec(const Vec&, const Vec&)>;
/// y = g(x, u).
using OutputMap = std::function<Vec(const Vec&, const Vec&)>;

/// One classical RK4 step with u held constant. Throws IntegrationError on a
/// non-finite stage or result.
Vec rk4_step(const VectorField& f, const Vec& x, const Vec& u, double h);

// Vector views of the plants. CSTR: x = (T, CA), u = (Tc).
// Bicycle: x = (x_f, y_f, yaw), u = (v, delta_s).
VectorField cstr_field(const CstrParams& p, double Tf, double CAf);
VectorField bicycle_field(const BicycleParams& p);

}  // namespace preftune
