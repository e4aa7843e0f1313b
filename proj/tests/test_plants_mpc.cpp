#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "preftune/errors.hpp"
#include "preftune/mpc.hpp"
#include "preftune/plants.hpp"

using namespace preftune;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

MpcConfig open_config(Eigen::Index nu, Eigen::Index ny, int Np, int Nu) {
  MpcConfig c;
  c.Ts = 1.0;
  c.Np = Np;
  c.Nu = Nu;
  c.Qy = Mat::Identity(ny, ny);
  c.Qu = Mat::Zero(nu, nu);
  c.Qdu = Mat::Zero(nu, nu);
  c.y_min = Vec::Constant(ny, -kInf);
  c.y_max = Vec::Constant(ny, kInf);
  c.u_min = Vec::Constant(nu, -kInf);
  c.u_max = Vec::Constant(nu, kInf);
  c.du_min = Vec::Constant(nu, -kInf);
  c.du_max = Vec::Constant(nu, kInf);
  return c;
}

// y = a x + b u, one state, one input, operating point at the origin.
LinearModel scalar_model(double a, double b) {
  LinearModel m;
  m.A = Mat::Constant(1, 1, a);
  m.B = Mat::Constant(1, 1, b);
  m.C = Mat::Identity(1, 1);
  m.D = Mat::Zero(1, 1);
  m.x_bar = Vec::Zero(1);
  m.u_bar = Vec::Zero(1);
  m.y_bar = Vec::Zero(1);
  m.c = Vec::Zero(1);
  return m;
}

Mat random_mat(std::mt19937_64& g, Eigen::Index r, Eigen::Index c, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(g);
  return m;
}

// Central-difference Jacobian with an explicit step, column by column.
Mat fd_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& at, double rel_step) {
  const Vec f0 = fn(at);
  Mat J(f0.size(), at.size());
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    const double h = std::max(rel_step, rel_step * std::abs(at(j)));
    Vec p = at, m = at;
    p(j) += h;
    m(j) -= h;
    J.col(j) = (fn(p) - fn(m)) / (2.0 * h);
  }
  return J;
}

void expect_rel_close(const Mat& a, const Mat& b, double rel) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      EXPECT_LE(std::abs(a(i, j) - b(i, j)), rel * std::max(std::abs(b(i, j)), 1e-3 * scale))
          << "entry (" << i << ", " << j << ")";
}

}  // namespace

TEST(Arrhenius, Examples) {
  const CstrParams p;
  EXPECT_EQ(arrhenius_rate(300.0, 0.0, p), 0.0);
  EXPECT_NEAR(arrhenius_rate(298.15, 8.56, p), 0.615, 0.01);
  EXPECT_NEAR(arrhenius_rate(320.0, 4.0, p), 2.0 * arrhenius_rate(320.0, 2.0, p), 1e-12);
  EXPECT_THROW(arrhenius_rate(0.0, 1.0, p), DomainError);
}

TEST(Cstr, DerivativeExamples) {
  const CstrParams p;
  const CstrDerivatives z = cstr_derivatives({310.0, 0.0}, {310.0, 310.0, 0.0}, p);
  EXPECT_EQ(z.dT_dt, 0.0);
  EXPECT_EQ(z.dCA_dt, 0.0);
  const CstrDerivatives lo = cstr_derivatives({310.0, 5.0}, {290.0, 298.15, 10.0}, p);
  const CstrDerivatives hi = cstr_derivatives({310.0, 5.0}, {291.0, 298.15, 10.0}, p);
  EXPECT_GT(hi.dT_dt, lo.dT_dt);
  // With CA = 0 the material balance can only push concentration up.
  EXPECT_GE(cstr_derivatives({350.0, 0.0}, {298.0, 298.15, 10.0}, p).dCA_dt, 0.0);
}

TEST(Cstr, EquilibriumResiduals) {
  const CstrParams p;
  const CstrInputs in;
  const CstrEquilibrium e856 = cstr_equilibrium(8.56, in, p);
  const CstrEquilibrium e2 = cstr_equilibrium(2.0, in, p);
  for (const auto& [ca, e] : {std::pair{8.56, e856}, std::pair{2.0, e2}}) {
    CstrInputs at = in;
    at.Tc = e.Tc;
    const CstrDerivatives d = cstr_derivatives({e.T, ca}, at, p);
    EXPECT_LE(std::abs(d.dT_dt), 1e-9);
    EXPECT_LE(std::abs(d.dCA_dt), 1e-9);
  }
  EXPECT_GT(e2.T, e856.T);
  EXPECT_THROW(cstr_equilibrium(in.CAf, in, p), EquilibriumError);
  EXPECT_THROW(cstr_equilibrium(0.0, in, p), EquilibriumError);
}

TEST(Bicycle, Examples) {
  const BicycleParams p;
  const BicycleDerivatives straight = bicycle_derivatives({0, 0, 0}, {10.0, 0.0}, p);
  EXPECT_DOUBLE_EQ(straight.dx_f, 10.0);
  EXPECT_DOUBLE_EQ(straight.dy_f, 0.0);
  EXPECT_DOUBLE_EQ(straight.dyaw, 0.0);
  const BicycleDerivatives still = bicycle_derivatives({3, 4, 0.5}, {0.0, 0.3}, p);
  EXPECT_EQ(still.dx_f, 0.0);
  EXPECT_EQ(still.dy_f, 0.0);
  EXPECT_EQ(still.dyaw, 0.0);
  EXPECT_NEAR(bicycle_derivatives({0, 0, 0}, {p.L, std::numbers::pi / 6}, p).dyaw, 0.5, 1e-15);
}

TEST(Bicycle, SpeedIdentity) {
  const BicycleParams p;
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const double v = 30.0 * std::abs(u(g));
    const BicycleDerivatives d = bicycle_derivatives({100 * u(g), 10 * u(g), 3 * u(g)}, {v, 1.5 * u(g)}, p);
    EXPECT_NEAR(std::hypot(d.dx_f, d.dy_f), v, 1e-12);
  }
}

TEST(Rk4, Examples) {
  const VectorField zero = [](const Vec& x, const Vec&) { return Vec::Zero(x.size()); };
  EXPECT_EQ(rk4_step(zero, vec({1.0, 2.0}), Vec(0), 0.3), vec({1.0, 2.0}));
  const VectorField decay = [](const Vec& x, const Vec&) { return Vec(-x); };
  const double x1 = rk4_step(decay, vec({1.0}), Vec(0), 0.1)(0);
  EXPECT_NEAR(x1, 0.9048375, 1e-7);
  EXPECT_LE(std::abs(x1 - std::exp(-0.1)), 1e-7);
  EXPECT_THROW(rk4_step(decay, vec({1.0}), Vec(0), 0.0), ArgumentError);
  const VectorField blowup = [](const Vec& x, const Vec&) { return Vec(x.array() / 0.0); };
  EXPECT_THROW(rk4_step(blowup, vec({1.0}), Vec(0), 0.1), IntegrationError);
}

TEST(Rk4, ConvergenceOrder) {
  const VectorField decay = [](const Vec& x, const Vec&) { return Vec(-x); };
  auto global_error = [&](int steps) {
    Vec x = vec({1.0});
    for (int k = 0; k < steps; ++k) x = rk4_step(decay, x, Vec(0), 1.0 / steps);
    return std::abs(x(0) - std::exp(-1.0));
  };
  for (int n : {5, 10, 20}) {
    const double order = std::log2(global_error(n) / global_error(2 * n));
    EXPECT_GE(order, 3.9) << "steps " << n;
  }
}

TEST(Linearize, LinearPlantIsExact) {
  std::mt19937_64 g(6);
  const Mat M = random_mat(g, 3, 3, 2.0);
  const Mat N = random_mat(g, 3, 2, 2.0);
  const VectorField f = [&](const Vec& x, const Vec& u) { return Vec(M * x + N * u); };
  const OutputMap y = [](const Vec& x, const Vec&) { return Vec(x.head(2)); };
  const ContinuousLinearization lin = linearize(f, y, vec({1.0, -2.0, 0.5}), vec({3.0, -1.0}));
  EXPECT_LE((lin.A - M).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((lin.B - N).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((lin.C - Mat::Identity(2, 3)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(lin.D.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Linearize, CstrMatchesFinerDifferences) {
  const CstrParams p;
  const CstrInputs in;
  const CstrEquilibrium e = cstr_equilibrium(8.56, in, p);
  const VectorField f = cstr_field(p, in.Tf, in.CAf);
  const OutputMap y = [](const Vec& x, const Vec&) { return Vec(x); };
  for (const Vec& xb : {vec({e.T, 8.56}), vec({330.0, 5.0}), vec({370.0, 2.0})}) {
    const Vec ub = vec({e.Tc});
    const ContinuousLinearization lin = linearize(f, y, xb, ub);
    const Mat Ax = fd_jacobian([&](const Vec& x) { return f(x, ub); }, xb, 1e-7);
    const Mat Bu = fd_jacobian([&](const Vec& u) { return f(xb, u); }, ub, 1e-7);
    expect_rel_close(lin.A, Ax, 1e-5);
    expect_rel_close(lin.B, Bu, 1e-5);
    // Hand derivatives of the balances.
    const double r = arrhenius_rate(xb(0), xb(1), p);
    const double dr_dT = r * p.E / (p.R * xb(0) * xb(0));
    const double dr_dCA = r / xb(1);
    Mat A(2, 2);
    A << -p.F_over_V + p.H / p.rhoCp * dr_dT - p.US_over_V / p.rhoCp, p.H / p.rhoCp * dr_dCA, -dr_dT,
        -p.F_over_V - dr_dCA;
    expect_rel_close(lin.A, A, 1e-5);
    EXPECT_NEAR(lin.B(0, 0), p.US_over_V / p.rhoCp, 1e-8);
    EXPECT_NEAR(lin.B(1, 0), 0.0, 1e-8);
  }
}

TEST(Linearize, BicycleMatchesFinerDifferences) {
  const BicycleParams p;
  const VectorField f = bicycle_field(p);
  const OutputMap y = [](const Vec& x, const Vec&) { return Vec(x); };
  const double v = 13.89;
  const ContinuousLinearization at0 = linearize(f, y, vec({0, 0, 0}), vec({v, 0}));
  EXPECT_NEAR(at0.B(0, 0), 1.0, 1e-8);
  EXPECT_NEAR(at0.B(2, 1), v / p.L, 1e-6);
  for (const Vec& xb : {vec({5.0, 1.0, 0.2}), vec({40.0, -2.0, -0.6})}) {
    const Vec ub = vec({15.0, 0.1});
    const ContinuousLinearization lin = linearize(f, y, xb, ub);
    expect_rel_close(lin.A, fd_jacobian([&](const Vec& x) { return f(x, ub); }, xb, 1e-7), 1e-5);
    expect_rel_close(lin.B, fd_jacobian([&](const Vec& u) { return f(xb, u); }, ub, 1e-7), 1e-5);
    EXPECT_LE((lin.f_bar - f(xb, ub)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Discretize, Examples) {
  const DiscreteMatrices integ = discretize(Mat::Zero(2, 2), Mat::Identity(2, 2), 0.7);
  EXPECT_LE((integ.A - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((integ.B - 0.7 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
  const DiscreteMatrices dec = discretize(-Mat::Identity(1, 1), Mat::Identity(1, 1), 1.0);
  EXPECT_NEAR(dec.A(0, 0), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(dec.B(0, 0), 1.0 - std::exp(-1.0), 1e-12);
}

TEST(Discretize, MatchesDenseIntegration) {
  std::mt19937_64 g(8);
  for (int t = 0; t < 5; ++t) {
    Mat Ac = random_mat(g, 3, 3, 1.0);
    Ac -= 2.0 * Mat::Identity(3, 3);  // stable
    const Mat Bc = random_mat(g, 3, 2, 1.0);
    const Vec w = random_mat(g, 3, 1, 1.0);
    const double Ts = 0.8;
    // Fundamental solution of the augmented system [x; u; 1] by RK4.
    Mat M = Mat::Zero(6, 6);
    M.topLeftCorner(3, 3) = Ac;
    M.block(0, 3, 3, 2) = Bc;
    M.block(0, 5, 3, 1) = w;
    Mat P = Mat::Identity(6, 6);
    const int steps = 10000;
    const double h = Ts / steps;
    for (int k = 0; k < steps; ++k) {
      const Mat k1 = M * P;
      const Mat k2 = M * (P + 0.5 * h * k1);
      const Mat k3 = M * (P + 0.5 * h * k2);
      const Mat k4 = M * (P + h * k3);
      P += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const DiscreteMatrices d = discretize(Ac, Bc, w, Ts);
    EXPECT_LE((d.A - P.topLeftCorner(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((d.B - P.block(0, 3, 3, 2)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((d.c - P.block(0, 5, 3, 1)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Condense, MatchesRollout) {
  std::mt19937_64 g(10);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index nx = 1 + t % 4, nu = 1 + t % 2, ny = 1 + t % 3;
    const int Np = 1 + t % 9;
    const int Nu = 1 + (t / 3) % Np;
    LinearModel m;
    m.A = random_mat(g, nx, nx, 0.6);
    m.B = random_mat(g, nx, nu, 1.0);
    m.C = random_mat(g, ny, nx, 1.0);
    m.D = random_mat(g, ny, nu, 0.5);
    m.x_bar = random_mat(g, nx, 1, 3.0);
    m.u_bar = random_mat(g, nu, 1, 3.0);
    m.y_bar = random_mat(g, ny, 1, 3.0);
    m.c = random_mat(g, nx, 1, 0.3);
    const Vec x_t = random_mat(g, nx, 1, 3.0);
    const Vec U = random_mat(g, nu * Nu, 1, 3.0);
    const CondensedPrediction pred = condense(m, x_t, Np, Nu);
    const Vec Y = pred.Gamma * U + pred.offset;
    auto u_at = [&](int k) { return Vec(U.segment(nu * std::min(k, Nu - 1), nu)); };
    Vec xt = x_t - m.x_bar;
    for (int k = 0; k < Np; ++k) {
      xt = m.A * xt + m.B * (u_at(k) - m.u_bar) + m.c;
      const Vec y = m.y_bar + m.C * xt + m.D * (u_at(k + 1) - m.u_bar);
      EXPECT_LE((Y.segment(ny * k, ny) - y).cwiseAbs().maxCoeff(), 1e-10) << "case " << t << " step " << k;
    }
  }
}

TEST(MpcQp, OneStepLeastSquares) {
  const LinearModel m = scalar_model(0.9, 0.5);
  MpcConfig cfg = open_config(1, 1, 1, 1);
  cfg.Qy(0, 0) = 2.0;
  cfg.Qdu(0, 0) = 0.3;
  const double x = 1.5, up = -0.4, yr = 2.0;
  MpcController ctrl(cfg, vec({up}));
  MpcReferences refs;
  refs.y_ref = {vec({yr})};
  const Vec u = ctrl.step(m, vec({x}), refs);
  const double q = 2.0, r = 0.3, a = 0.9, b = 0.5;
  EXPECT_NEAR(u(0), (q * b * (yr - a * x) + r * up) / (q * b * b + r), 1e-7);
  EXPECT_DOUBLE_EQ(ctrl.u_prev()(0), u(0));
  EXPECT_GE(ctrl.last_stats().solve_time, 0.0);
}

TEST(MpcQp, RestingAtEquilibriumKeepsInput) {
  LinearModel m = scalar_model(0.5, 1.0);
  m.x_bar = vec({2.0});
  m.u_bar = vec({3.0});
  m.y_bar = vec({2.0});
  MpcConfig cfg = open_config(1, 1, 5, 2);
  cfg.Qdu(0, 0) = 1.0;
  MpcController ctrl(cfg, vec({3.0}));
  MpcReferences refs;
  refs.y_ref = {vec({2.0})};
  EXPECT_NEAR(ctrl.step(m, vec({2.0}), refs)(0), 3.0, 1e-7);
  const MpcQp built = build_mpc_qp(m, vec({2.0}), vec({3.0}), refs, cfg);
  const QpSolution s = solve_qp(built.qp);
  EXPECT_NEAR(s.objective + built.constant, 0.0, 1e-8);
}

TEST(MpcQp, InputAndRateBounds) {
  const LinearModel m = scalar_model(0.0, 1.0);
  MpcConfig cfg = open_config(1, 1, 1, 1);
  MpcReferences refs;
  refs.y_ref = {vec({25.0})};
  {
    MpcController free(cfg, vec({0.0}));
    EXPECT_NEAR(free.step(m, vec({0.0}), refs)(0), 25.0, 1e-6);
  }
  {
    MpcConfig c = cfg;
    c.u_max = vec({20.0});
    MpcController ctrl(c, vec({0.0}));
    EXPECT_NEAR(ctrl.step(m, vec({0.0}), refs)(0), 20.0, 1e-9);
  }
  {
    MpcConfig c = cfg;
    c.du_min = vec({-10.0});
    c.du_max = vec({10.0});
    MpcController ctrl(c, vec({0.0}));
    EXPECT_NEAR(ctrl.step(m, vec({0.0}), refs)(0), 10.0, 1e-9);
    EXPECT_NEAR(ctrl.step(m, vec({0.0}), refs)(0), 20.0, 1e-9);
    EXPECT_NEAR(ctrl.step(m, vec({0.0}), refs)(0), 25.0, 1e-6);
  }
}

TEST(MpcQp, RejectsBadConfigs) {
  const LinearModel m = scalar_model(0.5, 1.0);
  MpcReferences refs;
  MpcConfig c = open_config(1, 1, 3, 4);
  EXPECT_THROW(build_mpc_qp(m, vec({0.0}), vec({0.0}), refs, c), ArgumentError);
  c = open_config(1, 1, 3, 1);
  c.Qy = Mat::Identity(2, 2);
  EXPECT_THROW(build_mpc_qp(m, vec({0.0}), vec({0.0}), refs, c), ArgumentError);
  c = open_config(1, 1, 3, 1);
  c.du_min = vec({1.0});
  c.du_max = vec({2.0});
  EXPECT_THROW(build_mpc_qp(m, vec({0.0}), vec({0.0}), refs, c), ArgumentError);
  c = open_config(1, 1, 3, 1);
  c.u_min = vec({1.0});
  c.u_max = vec({0.0});
  EXPECT_THROW(build_mpc_qp(m, vec({0.0}), vec({0.0}), refs, c), ArgumentError);
  c = open_config(1, 1, 3, 1);
  EXPECT_THROW(build_mpc_qp(m, vec({0.0, 1.0}), vec({0.0}), refs, c), ArgumentError);
}

TEST(MpcQp, ZeroWeightOutputsDoNotEnterTheCost) {
  std::mt19937_64 g(12);
  LinearModel m;
  m.A = random_mat(g, 2, 2, 0.5);
  m.B = random_mat(g, 2, 1, 1.0);
  m.C = Mat::Identity(2, 2);
  m.D = Mat::Zero(2, 1);
  m.x_bar = Vec::Zero(2);
  m.u_bar = Vec::Zero(1);
  m.y_bar = Vec::Zero(2);
  m.c = Vec::Zero(2);
  MpcConfig cfg = open_config(1, 2, 6, 2);
  cfg.Qy << 0, 0, 0, 1;
  cfg.Qdu(0, 0) = 0.1;
  MpcReferences refs;
  refs.y_ref = {vec({5.0, 1.0})};
  const MpcQp a = build_mpc_qp(m, vec({0.3, -0.2}), vec({0.0}), refs, cfg);
  LinearModel m2 = m;
  m2.C.row(0) = random_mat(g, 1, 2, 3.0);
  refs.y_ref = {vec({-7.0, 1.0})};
  const MpcQp b = build_mpc_qp(m2, vec({0.3, -0.2}), vec({0.0}), refs, cfg);
  EXPECT_LE((a.qp.H - b.qp.H).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((a.qp.f - b.qp.f).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MpcQp, SlackCoversOutputViolations) {
  std::mt19937_64 g(14);
  for (int t = 0; t < 50; ++t) {
    LinearModel m;
    m.A = random_mat(g, 2, 2, 0.6);
    m.B = random_mat(g, 2, 1, 1.0);
    m.C = random_mat(g, 2, 2, 1.0);
    m.D = Mat::Zero(2, 1);
    m.x_bar = Vec::Zero(2);
    m.u_bar = Vec::Zero(1);
    m.y_bar = Vec::Zero(2);
    m.c = random_mat(g, 2, 1, 0.5);
    MpcConfig cfg = open_config(1, 2, 5, 2);
    cfg.Qdu(0, 0) = 0.1;
    cfg.Qeps = 10.0;
    cfg.u_min = vec({-0.2});
    cfg.u_max = vec({0.2});
    cfg.y_min = vec({-0.1, -0.1});
    cfg.y_max = vec({0.1, 0.1});
    MpcReferences refs;
    refs.y_ref = {vec({1.0, -1.0})};
    const MpcQp built = build_mpc_qp(m, random_mat(g, 2, 1, 2.0), vec({0.0}), refs, cfg);
    const QpSolution s = solve_qp(built.qp);
    ASSERT_EQ(s.status, QpStatus::Optimal);
    const Eigen::Index nU = s.x.size() - 1;
    const double eps = s.x(nU);
    EXPECT_GE(eps, -1e-9);
    const Vec Y = built.prediction.Gamma * s.x.head(nU) + built.prediction.offset;
    for (Eigen::Index i = 0; i < Y.size(); ++i) {
      const double violation = std::max(Y(i) - 0.1, -0.1 - Y(i));
      EXPECT_LE(violation, eps + 1e-6);
    }
    EXPECT_LE(s.x.head(nU).cwiseAbs().maxCoeff(), 0.2 + 1e-9);
  }
}

TEST(MpcController, LinearizedCstrSettlesAtEquilibriumInput) {
  const CstrParams p;
  const CstrInputs in;
  const CstrEquilibrium start = cstr_equilibrium(8.56, in, p);
  const double target = 8.0;
  const CstrEquilibrium goal = cstr_equilibrium(target, in, p);
  const VectorField f = cstr_field(p, in.Tf, in.CAf);
  const OutputMap y = [](const Vec& x, const Vec&) { return Vec(x); };
  MpcConfig cfg = open_config(1, 2, 10, 3);
  cfg.Ts = 0.25;
  cfg.Qy << 0, 0, 0, 1;
  cfg.Qdu(0, 0) = 1e-2;
  cfg.u_min = vec({284.0});
  cfg.u_max = vec({310.0});
  cfg.du_min = vec({-10.0});
  cfg.du_max = vec({10.0});
  MpcController ctrl(cfg, vec({start.Tc}));
  MpcReferences refs;
  refs.y_ref = {vec({0.0, target})};
  Vec x = vec({start.T, 8.56});
  for (int k = 0; k < 400; ++k) {
    const LinearModel m = make_linear_model(f, y, x, ctrl.u_prev(), cfg.Ts);
    const Vec u = ctrl.step(m, x, refs);
    ASSERT_GE(u(0), 284.0);
    ASSERT_LE(u(0), 310.0);
    for (int s = 0; s < 25; ++s) x = rk4_step(f, x, u, cfg.Ts / 25);
  }
  EXPECT_NEAR(ctrl.u_prev()(0), goal.Tc, 1e-3);
  EXPECT_NEAR(x(1), target, 1e-4);
}

TEST(MpcController, RandomStepsRespectHardBounds) {
  std::mt19937_64 g(15);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const VectorField f = bicycle_field({});
  const OutputMap y = [](const Vec& x, const Vec&) { return Vec(x); };
  for (int t = 0; t < 200; ++t) {
    MpcConfig cfg = open_config(2, 3, 5 + t % 10, 1 + t % 5);
    cfg.Ts = 0.1 + 0.3 * std::abs(u(g));
    cfg.Qy = Vec(vec({1, 1, 0})).asDiagonal();
    cfg.Qdu = Vec(vec({std::pow(10, 3 * u(g)), std::pow(10, 3 * u(g))})).asDiagonal();
    cfg.u_min = vec({40 / 3.6, -0.785});
    cfg.u_max = vec({70 / 3.6, 0.785});
    const double rate = 0.0873 * cfg.Ts;
    cfg.du_min = vec({-kInf, -rate});
    cfg.du_max = vec({kInf, rate});
    cfg.y_min = vec({-kInf, -kInf, -0.785});
    cfg.y_max = vec({kInf, kInf, 0.785});
    const Vec u_prev = vec({15.0 + 3.0 * u(g), 0.5 * u(g)});
    MpcController ctrl(cfg, u_prev);
    const Vec x = vec({50 * u(g), 3 * u(g), 0.5 * u(g)});
    MpcReferences refs;
    refs.y_ref = {vec({x(0) + 30.0 * u(g), 3.0 * u(g), 0.0})};
    const Vec applied = ctrl.step(make_linear_model(f, y, x, u_prev, cfg.Ts), x, refs);
    for (Eigen::Index j = 0; j < 2; ++j) {
      EXPECT_GE(applied(j), cfg.u_min(j));
      EXPECT_LE(applied(j), cfg.u_max(j));
      EXPECT_GE(applied(j) - u_prev(j), cfg.du_min(j));
      EXPECT_LE(applied(j) - u_prev(j), cfg.du_max(j));
    }
  }
}
