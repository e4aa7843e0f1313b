#include "preftune/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "preftune/errors.hpp"

namespace preftune {

ContinuousLinearization linearize(const VectorField& f, const OutputMap& g, const Vec& x_bar, const Vec& u_bar) {
  const Eigen::Index nx = x_bar.size();
  const Eigen::Index nu = u_bar.size();
  ContinuousLinearization lin;
  lin.x_bar = x_bar;
  lin.u_bar = u_bar;
  lin.f_bar = f(x_bar, u_bar);
  lin.y_bar = g(x_bar, u_bar);
  if (lin.f_bar.size() != nx) throw ArgumentError("linearize: f must return one entry per state");
  const Eigen::Index ny = lin.y_bar.size();
  lin.A.resize(nx, nx);
  lin.B.resize(nx, nu);
  lin.C.resize(ny, nx);
  lin.D.resize(ny, nu);

  auto step = [](double v) { return std::max(1e-6, 1e-6 * std::abs(v)); };
  for (Eigen::Index j = 0; j < nx; ++j) {
    const double h = step(x_bar(j));
    Vec xp = x_bar;
    Vec xm = x_bar;
    xp(j) += h;
    xm(j) -= h;
    const double w = xp(j) - xm(j);  // the representable step actually taken
    lin.A.col(j) = (f(xp, u_bar) - f(xm, u_bar)) / w;
    lin.C.col(j) = (g(xp, u_bar) - g(xm, u_bar)) / w;
  }
  for (Eigen::Index j = 0; j < nu; ++j) {
    const double h = step(u_bar(j));
    Vec up = u_bar;
    Vec um = u_bar;
    up(j) += h;
    um(j) -= h;
    const double w = up(j) - um(j);
    lin.B.col(j) = (f(x_bar, up) - f(x_bar, um)) / w;
    lin.D.col(j) = (g(x_bar, up) - g(x_bar, um)) / w;
  }
  if (!lin.A.allFinite() || !lin.B.allFinite() || !lin.C.allFinite() || !lin.D.allFinite() ||
      !lin.f_bar.allFinite() || !lin.y_bar.allFinite()) {
    throw LinearizationError("non-finite Jacobian entry");
  }
  return lin;
}

Mat expm(const Mat& m) {
  if (m.rows() != m.cols()) throw ArgumentError("expm needs a square matrix");
  if (!m.allFinite()) throw ArgumentError("expm needs a finite matrix");
  const Eigen::Index n = m.rows();
  const double norm = n == 0 ? 0.0 : m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Mat a = m / std::ldexp(1.0, squarings);
  Mat term = Mat::Identity(n, n);
  Mat sum = Mat::Identity(n, n);
  for (int k = 1; k <= 40; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-17 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

DiscreteMatrices discretize(const Mat& Ac, const Mat& Bc, double Ts) {
  DiscreteMatrices d = discretize(Ac, Bc, Vec::Zero(Ac.rows()), Ts);
  d.c.resize(0);
  return d;
}

DiscreteMatrices discretize(const Mat& Ac, const Mat& Bc, const Vec& w, double Ts) {
  if (!(Ts > 0.0)) throw ArgumentError("discretize needs Ts > 0");
  const Eigen::Index nx = Ac.rows();
  const Eigen::Index nu = Bc.cols();
  if (Ac.cols() != nx || Bc.rows() != nx || w.size() != nx) throw ArgumentError("discretize: shape mismatch");
  Mat aug = Mat::Zero(nx + nu + 1, nx + nu + 1);
  aug.topLeftCorner(nx, nx) = Ac;
  aug.block(0, nx, nx, nu) = Bc;
  aug.block(0, nx + nu, nx, 1) = w;
  const Mat e = expm(aug * Ts);
  return {e.topLeftCorner(nx, nx), e.block(0, nx, nx, nu), e.block(0, nx + nu, nx, 1)};
}

void LinearModel::validate() const {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() || D.cols() != B.cols() ||
      x_bar.size() != n || u_bar.size() != B.cols() || y_bar.size() != C.rows() || c.size() != n) {
    throw ArgumentError("linear model: inconsistent dimensions");
  }
}

LinearModel make_linear_model(const VectorField& f, const OutputMap& g, const Vec& x_bar, const Vec& u_bar,
                              double Ts) {
  const ContinuousLinearization lin = linearize(f, g, x_bar, u_bar);
  const DiscreteMatrices d = discretize(lin.A, lin.B, lin.f_bar, Ts);
  return {d.A, d.B, lin.C, lin.D, x_bar, u_bar, lin.y_bar, d.c};
}

void MpcConfig::validate(Eigen::Index nu, Eigen::Index ny) const {
  if (!(Ts > 0.0)) throw ArgumentError("MPC Ts must be > 0");
  if (Np < 1 || Nu < 1 || Nu > Np) throw ArgumentError("MPC horizons need 1 <= Nu <= Np");
  if (Qy.rows() != ny || Qy.cols() != ny) throw ArgumentError("MPC Qy shape mismatch");
  if (Qu.rows() != nu || Qu.cols() != nu) throw ArgumentError("MPC Qu shape mismatch");
  if (Qdu.rows() != nu || Qdu.cols() != nu) throw ArgumentError("MPC Qdu shape mismatch");
  if (!(Qeps > 0.0)) throw ArgumentError("MPC Qeps must be > 0");
  auto check_pair = [](const Vec& lo, const Vec& hi, Eigen::Index n, const char* what) {
    if (lo.size() != n || hi.size() != n) throw ArgumentError(std::string("MPC ") + what + " bounds shape mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isnan(lo(i)) || std::isnan(hi(i)) || lo(i) > hi(i)) {
        throw ArgumentError(std::string("MPC ") + what + " bounds must satisfy min <= max");
      }
    }
  };
  check_pair(y_min, y_max, ny, "output");
  check_pair(u_min, u_max, nu, "input");
  check_pair(du_min, du_max, nu, "input rate");
  for (Eigen::Index i = 0; i < nu; ++i) {
    if (du_min(i) > 0.0 || du_max(i) < 0.0) throw ArgumentError("MPC rate bounds must contain 0");
  }
  for (const Mat* q : {&Qy, &Qu, &Qdu}) {
    if (!q->allFinite() || (*q - q->transpose()).cwiseAbs().maxCoeff() > 1e-10) {
      throw ArgumentError("MPC weights must be finite and symmetric");
    }
    if (q->rows() > 0 && Eigen::SelfAdjointEigenSolver<Mat>(*q).eigenvalues().minCoeff() < -1e-12) {
      throw ArgumentError("MPC weights must be positive semidefinite");
    }
  }
}

namespace {

const Vec& held(const std::vector<Vec>& seq, std::size_t k) { return seq[std::min(k, seq.size() - 1)]; }

// Selector of input block min(k, Nu-1) from U.
Mat selector(Eigen::Index nu, int Nu, int k) {
  Mat e = Mat::Zero(nu, nu * Nu);
  e.block(0, nu * std::min(k, Nu - 1), nu, nu).setIdentity();
  return e;
}

}  // namespace

CondensedPrediction condense(const LinearModel& m, const Vec& x_t, int Np, int Nu) {
  m.validate();
  if (Np < 1 || Nu < 1 || Nu > Np) throw ArgumentError("condense needs 1 <= Nu <= Np");
  if (x_t.size() != m.nx()) throw ArgumentError("condense: state dimension mismatch");
  const Eigen::Index nx = m.nx();
  const Eigen::Index nu = m.nu();
  const Eigen::Index ny = m.ny();
  const Eigen::Index nU = nu * Nu;
  CondensedPrediction p;
  p.Gamma = Mat::Zero(ny * Np, nU);
  p.offset = Vec::Zero(ny * Np);
  Mat sx = Mat::Zero(nx, nU);
  Vec fx = x_t - m.x_bar;
  const Vec bu = m.B * m.u_bar;
  for (int k = 0; k < Np; ++k) {
    sx = m.A * sx + m.B * selector(nu, Nu, k);
    fx = m.A * fx - bu + m.c;
    p.Gamma.block(ny * k, 0, ny, nU) = m.C * sx + m.D * selector(nu, Nu, k + 1);
    p.offset.segment(ny * k, ny) = m.y_bar + m.C * fx - m.D * m.u_bar;
  }
  return p;
}

MpcQp build_mpc_qp(const LinearModel& m, const Vec& x_t, const Vec& u_prev, const MpcReferences& refs,
                   const MpcConfig& cfg) {
  m.validate();
  const Eigen::Index nu = m.nu();
  const Eigen::Index ny = m.ny();
  cfg.validate(nu, ny);
  if (u_prev.size() != nu) throw ArgumentError("MPC: u_prev dimension mismatch");
  auto check_seq = [](const std::vector<Vec>& s, Eigen::Index n, const char* what) {
    for (const Vec& v : s) {
      if (v.size() != n) throw ArgumentError(std::string("MPC: ") + what + " dimension mismatch");
    }
  };
  check_seq(refs.y_ref, ny, "y_ref");
  check_seq(refs.u_ref, nu, "u_ref");
  check_seq(refs.y_min, ny, "y_min");
  check_seq(refs.y_max, ny, "y_max");

  const int Np = cfg.Np;
  const int Nu = cfg.Nu;
  const Eigen::Index nU = nu * Nu;
  const Eigen::Index nv = nU + 1;
  const Eigen::Index eps = nU;

  MpcQp out;
  out.prediction = condense(m, x_t, Np, Nu);
  const Mat& G = out.prediction.Gamma;
  const Vec& o = out.prediction.offset;
  QpProblem& qp = out.qp;
  qp.H = Mat::Zero(nv, nv);
  qp.f = Vec::Zero(nv);

  // sum_k ||Mk U - rk||^2_Q = U'(Mk'Q Mk)U - 2 (Mk'Q rk)'U + rk'Q rk, and the
  // QP uses 0.5 x'Hx, hence the factors of 2.
  auto add_term = [&](const Mat& Mk, const Vec& rk, const Mat& Q) {
    const Mat qm = Q * Mk;
    qp.H.topLeftCorner(nU, nU) += 2.0 * Mk.transpose() * qm;
    qp.f.head(nU) -= 2.0 * qm.transpose() * rk;
    out.constant += rk.dot(Q * rk);
  };

  for (int k = 1; k <= Np; ++k) {
    const Mat Gk = G.middleRows(ny * (k - 1), ny);
    const Vec ok = o.segment(ny * (k - 1), ny);
    const Vec r = refs.y_ref.empty() ? Vec(m.y_bar) : held(refs.y_ref, static_cast<std::size_t>(k - 1));
    if (cfg.Qy.cwiseAbs().maxCoeff() > 0.0) add_term(Gk, r - ok, cfg.Qy);
  }
  if (cfg.Qu.cwiseAbs().maxCoeff() > 0.0) {
    for (int k = 0; k < Np; ++k) {
      const Vec r = refs.u_ref.empty() ? Vec(m.u_bar) : held(refs.u_ref, static_cast<std::size_t>(k));
      add_term(selector(nu, Nu, k), r, cfg.Qu);
    }
  }
  if (cfg.Qdu.cwiseAbs().maxCoeff() > 0.0) {
    add_term(selector(nu, Nu, 0), u_prev, cfg.Qdu);
    for (int k = 1; k < Nu; ++k) {
      add_term(selector(nu, Nu, k) - selector(nu, Nu, k - 1), Vec::Zero(nu), cfg.Qdu);
    }
  }
  qp.H(eps, eps) = 2.0 * cfg.Qeps;
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();

  std::vector<std::pair<Vec, double>> rows;  // (coefficients over U and eps, rhs)
  for (int k = 1; k <= Np; ++k) {
    const std::size_t idx = static_cast<std::size_t>(k - 1);
    const Vec& lo = refs.y_min.empty() ? cfg.y_min : held(refs.y_min, idx);
    const Vec& hi = refs.y_max.empty() ? cfg.y_max : held(refs.y_max, idx);
    for (Eigen::Index j = 0; j < ny; ++j) {
      const Eigen::Index r = ny * (k - 1) + j;
      if (std::isfinite(hi(j))) {
        Vec a = Vec::Zero(nv);
        a.head(nU) = G.row(r).transpose();
        a(eps) = -1.0;
        rows.emplace_back(std::move(a), hi(j) - o(r));
      }
      if (std::isfinite(lo(j))) {
        Vec a = Vec::Zero(nv);
        a.head(nU) = -G.row(r).transpose();
        a(eps) = -1.0;
        rows.emplace_back(std::move(a), o(r) - lo(j));
      }
    }
  }
  for (int k = 0; k < Nu; ++k) {
    for (Eigen::Index j = 0; j < nu; ++j) {
      Vec a = Vec::Zero(nv);
      a(nu * k + j) = 1.0;
      double base = 0.0;
      if (k == 0) {
        base = u_prev(j);
      } else {
        a(nu * (k - 1) + j) = -1.0;
      }
      if (std::isfinite(cfg.du_max(j))) rows.emplace_back(a, cfg.du_max(j) + base);
      if (std::isfinite(cfg.du_min(j))) rows.emplace_back(-a, -(cfg.du_min(j) + base));
    }
  }
  qp.A_ineq.resize(static_cast<Eigen::Index>(rows.size()), nv);
  qp.b_ineq.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    qp.A_ineq.row(static_cast<Eigen::Index>(r)) = rows[r].first.transpose();
    qp.b_ineq(static_cast<Eigen::Index>(r)) = rows[r].second;
  }

  Vec lower(nv);
  Vec upper(nv);
  for (int k = 0; k < Nu; ++k) {
    lower.segment(nu * k, nu) = cfg.u_min;
    upper.segment(nu * k, nu) = cfg.u_max;
  }
  lower(eps) = 0.0;
  upper(eps) = std::numeric_limits<double>::infinity();
  qp.lower = lower;
  qp.upper = upper;
  return out;
}

MpcController::MpcController(MpcConfig cfg, Vec u_initial) : cfg_(std::move(cfg)), u_prev_(std::move(u_initial)) {}

Vec MpcController::step(const LinearModel& m, const Vec& x_t, const MpcReferences& refs) {
  const auto t0 = std::chrono::steady_clock::now();
  const MpcQp built = build_mpc_qp(m, x_t, u_prev_, refs, cfg_);
  QpSettings settings;
  settings.tol = cfg_.qp_tol;
  const QpSolution sol = solve_qp(built.qp, settings);
  const auto t1 = std::chrono::steady_clock::now();

  stats_ = MpcStats{};
  stats_.solve_time = std::chrono::duration<double>(t1 - t0).count();
  stats_.status = sol.status;
  stats_.iterations = sol.iterations;
  stats_.kkt_residual = sol.kkt_residual;
  stats_.hit_max_iter = sol.status == QpStatus::MaxIter;
  if (sol.status == QpStatus::Infeasible) {
    throw MpcError("MPC QP infeasible (certificate residual " + std::to_string(sol.certificate_residual) +
                   ", " + std::to_string(built.qp.A_ineq.rows()) + " inequality rows)");
  }
  const Eigen::Index nu = m.nu();
  stats_.epsilon = std::max(0.0, sol.x(sol.x.size() - 1));
  Vec u = sol.x.head(nu);
  for (Eigen::Index j = 0; j < nu; ++j) {
    const double lo = std::max(cfg_.u_min(j), u_prev_(j) + cfg_.du_min(j));
    const double hi = std::min(cfg_.u_max(j), u_prev_(j) + cfg_.du_max(j));
    if (lo > hi) throw MpcError("input and rate bounds leave no admissible move");
    if (!std::isfinite(u(j))) throw MpcError("MPC produced a non-finite input");
    u(j) = std::clamp(u(j), lo, hi);
    // Rounding in u_prev + du can leave u - u_prev one ulp outside the rate bound.
    while (u(j) - u_prev_(j) > cfg_.du_max(j)) u(j) = std::nextafter(u(j), u_prev_(j));
    while (u(j) - u_prev_(j) < cfg_.du_min(j)) u(j) = std::nextafter(u(j), u_prev_(j));
  }
  u_prev_ = u;
  return u;
}

}  // namespace preftune
