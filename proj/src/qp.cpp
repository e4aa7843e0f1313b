// Dense convex QP: Mehrotra predictor-corrector interior point on the
// inequality-stacked form, followed by an optional active-set polish that
// re-solves the equality-constrained KKT system of the identified active set.

#include "preftune/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "preftune/errors.hpp"

namespace preftune {
namespace {

constexpr double kShift = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Origin of one stacked inequality row.
enum class RowKind { Ineq, Upper, Lower };
struct RowRef {
  RowKind kind;
  Eigen::Index index;
};

struct Stacked {
  Mat G;
  Vec h;
  std::vector<RowRef> rows;
};

Stacked stack_inequalities(const QpProblem& p) {
  const Eigen::Index n = p.num_vars();
  std::vector<RowRef> rows;
  for (Eigen::Index k = 0; k < p.b_ineq.size(); ++k) {
    if (p.b_ineq[k] < kInf) rows.push_back({RowKind::Ineq, k});
  }
  if (p.upper) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((*p.upper)[i] < kInf) rows.push_back({RowKind::Upper, i});
    }
  }
  if (p.lower) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((*p.lower)[i] > -kInf) rows.push_back({RowKind::Lower, i});
    }
  }
  Stacked s;
  const auto m = static_cast<Eigen::Index>(rows.size());
  s.G = Mat::Zero(m, n);
  s.h = Vec::Zero(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& ref = rows[static_cast<std::size_t>(r)];
    switch (ref.kind) {
      case RowKind::Ineq:
        s.G.row(r) = p.A_ineq.row(ref.index);
        s.h[r] = p.b_ineq[ref.index];
        break;
      case RowKind::Upper:
        s.G(r, ref.index) = 1.0;
        s.h[r] = (*p.upper)[ref.index];
        break;
      case RowKind::Lower:
        s.G(r, ref.index) = -1.0;
        s.h[r] = -(*p.lower)[ref.index];
        break;
    }
  }
  s.rows = std::move(rows);
  return s;
}

// Scatter stacked multipliers back onto the problem's constraint families.
void unstack_multipliers(const QpProblem& p, const Stacked& st, const Vec& z, QpSolution& sol) {
  const Eigen::Index n = p.num_vars();
  sol.lambda_ineq = Vec::Zero(p.b_ineq.size());
  sol.lambda_lower = Vec::Zero(n);
  sol.lambda_upper = Vec::Zero(n);
  for (std::size_t r = 0; r < st.rows.size(); ++r) {
    const auto& ref = st.rows[r];
    const double v = z[static_cast<Eigen::Index>(r)];
    switch (ref.kind) {
      case RowKind::Ineq: sol.lambda_ineq[ref.index] = v; break;
      case RowKind::Upper: sol.lambda_upper[ref.index] = v; break;
      case RowKind::Lower: sol.lambda_lower[ref.index] = v; break;
    }
  }
}

struct StackedKkt {
  double stationarity, primal, dual, complementarity;
};

StackedKkt stacked_kkt(const Mat& H, const Vec& f, const Stacked& st, const Mat& A, const Vec& b, const Vec& x,
                       const Vec& z, const Vec& y) {
  const Vec Hx = H * x;
  const Vec Gz = st.G.transpose() * z;
  const Vec Ay = A.rows() ? Vec(A.transpose() * y) : Vec::Zero(x.size());
  const Vec rd = Hx + f + Gz + Ay;
  StackedKkt k{};
  k.stationarity =
      inf_norm(rd) / (1.0 + std::max({inf_norm(Hx), inf_norm(f), inf_norm(Gz), inf_norm(Ay)}));
  const Vec Gx = st.G * x;
  double viol = 0.0;
  for (Eigen::Index i = 0; i < Gx.size(); ++i) viol = std::max(viol, Gx[i] - st.h[i]);
  double pscale = 1.0 + std::max(inf_norm(Gx), inf_norm(st.h));
  if (A.rows()) {
    const Vec Ax = A * x;
    viol = std::max(viol, inf_norm(Vec(Ax - b)));
    pscale = std::max(pscale, 1.0 + std::max(inf_norm(Ax), inf_norm(b)));
  }
  k.primal = viol / pscale;
  double neg = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) neg = std::max(neg, -z[i]);
  k.dual = neg / (1.0 + inf_norm(z));
  double comp = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    comp = std::max(comp, std::abs(z[i] * (st.h[i] - Gx[i])));
  }
  const double obj = 0.5 * x.dot(Hx) + f.dot(x);
  k.complementarity = comp / (1.0 + std::abs(obj));
  return k;
}

double kkt_max(const StackedKkt& k) { return std::max({k.stationarity, k.primal, k.dual, k.complementarity}); }

// Newton systems of one IPM iteration share the factorization of
// K = H + G' W G (and the Schur complement for equality rows).
class NewtonSolver {
 public:
  NewtonSolver(const Mat& H, const Stacked& st, const Mat& A, const Vec& s, const Vec& z)
      : G_(st.G), A_(A), s_(s), z_(z) {
    const Vec w = z.cwiseQuotient(s);
    Mat K = H;
    K.noalias() += G_.transpose() * w.asDiagonal() * G_;
    llt_.compute(K);
    if (llt_.info() != Eigen::Success) {
      // Numerically indefinite after cancellation: nudge the diagonal.
      K.diagonal().array() += 1e-12 * (1.0 + K.diagonal().cwiseAbs().maxCoeff());
      llt_.compute(K);
    }
    ok_ = llt_.info() == Eigen::Success;
    if (ok_ && A_.rows()) {
      const Mat KiAt = llt_.solve(A_.transpose());
      schur_.compute(A_ * KiAt);
      ok_ = schur_.info() == Eigen::Success;
    }
  }

  bool ok() const { return ok_; }

  void solve(const Vec& rd, const Vec& rp, const Vec& re, const Vec& rc, Vec& dx, Vec& ds, Vec& dz,
             Vec& dy) const {
    const Vec tmp = (z_.cwiseProduct(rp) - rc).cwiseQuotient(s_);
    const Vec rhs1 = -rd - G_.transpose() * tmp;
    if (A_.rows()) {
      const Vec Kr = llt_.solve(rhs1);
      dy = schur_.solve(A_ * Kr + re);
      dx = llt_.solve(rhs1 - A_.transpose() * dy);
    } else {
      dy.resize(0);
      dx = llt_.solve(rhs1);
    }
    ds = -rp - G_ * dx;
    dz = (-rc - z_.cwiseProduct(ds)).cwiseQuotient(s_);
  }

 private:
  const Mat& G_;
  const Mat& A_;
  const Vec& s_;
  const Vec& z_;
  Eigen::LLT<Mat> llt_;
  Eigen::LDLT<Mat> schur_;
  bool ok_ = false;
};

double max_step(const Vec& v, const Vec& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  }
  return a;
}

struct IpmResult {
  Vec x, s, z, y;
  int iterations = 0;
  bool converged = false;
};

IpmResult run_ipm(const Mat& H, const Vec& f, const Stacked& st, const Mat& A, const Vec& b, double tol,
                  int max_iter) {
  const Eigen::Index n = f.size();
  const Eigen::Index m = st.h.size();
  const Eigen::Index p = A.rows();
  IpmResult r;

  // Initial point: solve the KKT system with W = I, then shift s and z inside the cone.
  {
    Vec ones = Vec::Ones(m);
    NewtonSolver init(H, st, A, ones, ones);
    Vec dx, ds, dz, dy;
    // Solves H x + G'z + A'y = -f, G x + s = h, A x = b, s + z = 0 (rc = 0 path).
    init.solve(f, -st.h, p ? Vec(-b) : Vec(), Vec::Zero(m), dx, ds, dz, dy);
    r.x = dx;
    r.y = p ? dy : Vec();
    Vec s0 = st.h - st.G * r.x;
    Vec z0 = -s0;
    const double ap = -s0.minCoeff();
    const double ad = -z0.minCoeff();
    r.s = ap < 0.0 ? s0 : Vec(s0.array() + 1.0 + ap);
    r.z = ad < 0.0 ? z0 : Vec(z0.array() + 1.0 + ad);
    if (!r.x.allFinite()) {
      r.x = Vec::Zero(n);
      r.s = Vec::Ones(m);
      r.z = Vec::Ones(m);
      r.y = Vec::Zero(p);
    }
  }

  Vec dx_a, ds_a, dz_a, dy_a, dx, ds, dz, dy;
  for (int it = 0; it < max_iter; ++it) {
    r.iterations = it;
    const Vec rd = H * r.x + f + st.G.transpose() * r.z + (p ? Vec(A.transpose() * r.y) : Vec::Zero(n));
    const Vec rp = st.G * r.x + r.s - st.h;
    const Vec re = p ? Vec(A * r.x - b) : Vec();
    const double mu = r.s.dot(r.z) / static_cast<double>(m);

    const StackedKkt k = stacked_kkt(H, f, st, A, b, r.x, r.z, r.y);
    if (k.stationarity <= tol && inf_norm(rp) / (1.0 + inf_norm(st.h)) <= tol &&
        (p == 0 || inf_norm(re) / (1.0 + inf_norm(b)) <= tol) && k.complementarity <= tol) {
      r.converged = true;
      return r;
    }

    NewtonSolver ns(H, st, A, r.s, r.z);
    if (!ns.ok()) break;

    // Predictor (affine scaling).
    const Vec rc_aff = r.s.cwiseProduct(r.z);
    ns.solve(rd, rp, re, rc_aff, dx_a, ds_a, dz_a, dy_a);
    const double a_aff = std::min(max_step(r.s, ds_a), max_step(r.z, dz_a));
    const double mu_aff = (r.s + a_aff * ds_a).dot(r.z + a_aff * dz_a) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // Corrector with centering.
    const Vec rc = rc_aff + ds_a.cwiseProduct(dz_a) - Vec::Constant(m, sigma * mu);
    ns.solve(rd, rp, re, rc, dx, ds, dz, dy);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(r.s, ds), max_step(r.z, dz)));
    if (!(dx.allFinite() && ds.allFinite() && dz.allFinite())) break;

    r.x += alpha * dx;
    r.s += alpha * ds;
    r.z += alpha * dz;
    if (p) r.y += alpha * dy;
    // Keep strictly interior against roundoff.
    r.s = r.s.cwiseMax(1e-300);
    r.z = r.z.cwiseMax(1e-300);
    r.iterations = it + 1;
  }
  return r;
}

// Re-solve with the active set as equalities; accept only if it is a
// valid KKT point at least as accurate as the IPM iterate.
bool polish(const Mat& H, const Vec& f, const Stacked& st, const Mat& A, const Vec& b, const Vec& s_ipm,
            Vec& x, Vec& z, Vec& y) {
  const Eigen::Index n = f.size();
  const Eigen::Index p = A.rows();
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] > s_ipm[i]) active.push_back(i);
  }
  const auto na = static_cast<Eigen::Index>(active.size());
  const Eigen::Index dim = n + na + p;
  Mat K = Mat::Zero(dim, dim);
  Vec rhs = Vec::Zero(dim);
  K.topLeftCorner(n, n) = H;
  rhs.head(n) = -f;
  for (Eigen::Index a = 0; a < na; ++a) {
    const Eigen::Index r = active[static_cast<std::size_t>(a)];
    K.block(n + a, 0, 1, n) = st.G.row(r);
    K.block(0, n + a, n, 1) = st.G.row(r).transpose();
    rhs[n + a] = st.h[r];
  }
  if (p) {
    K.block(n + na, 0, p, n) = A;
    K.block(0, n + na, n, p) = A.transpose();
    rhs.tail(p) = b;
  }
  Eigen::FullPivLU<Mat> lu(K);
  const Vec sol = lu.solve(rhs);
  if (!sol.allFinite() || (K * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + inf_norm(rhs))) return false;

  Vec xp = sol.head(n);
  Vec zp = Vec::Zero(z.size());
  for (Eigen::Index a = 0; a < na; ++a) zp[active[static_cast<std::size_t>(a)]] = sol[n + a];
  if (zp.size() && zp.minCoeff() < 0.0) {
    if (zp.minCoeff() < -1e-9 * (1.0 + inf_norm(zp))) return false;
    zp = zp.cwiseMax(0.0);
  }
  Vec yp = p ? Vec(sol.tail(p)) : Vec();

  const double before = kkt_max(stacked_kkt(H, f, st, A, b, x, z, y));
  const double after = kkt_max(stacked_kkt(H, f, st, A, b, xp, zp, yp));
  if (!(after <= before)) return false;
  x = std::move(xp);
  z = std::move(zp);
  y = std::move(yp);
  return true;
}

// Phase-1 feasibility problem: min t + tiny*||x||^2 s.t. Gx - t <= h, t >= 0, Ax = b.
// Returns the optimal t and the multipliers of the G rows (a Farkas
// certificate when t > 0).
double phase_one(const Stacked& st, const Mat& A, const Vec& b, Vec& z_cert, Vec& y_cert) {
  const Eigen::Index n = st.G.cols();
  const Eigen::Index m = st.h.size();
  Stacked ph;
  ph.G = Mat::Zero(m + 1, n + 1);
  ph.G.topLeftCorner(m, n) = st.G;
  ph.G.block(0, n, m, 1).setConstant(-1.0);
  ph.G(m, n) = -1.0;
  ph.h = Vec::Zero(m + 1);
  ph.h.head(m) = st.h;
  Mat H = Mat::Identity(n + 1, n + 1) * 1e-9;
  Vec f = Vec::Zero(n + 1);
  f[n] = 1.0;
  Mat Ap = Mat::Zero(A.rows(), n + 1);
  if (A.rows()) Ap.leftCols(n) = A;
  IpmResult r = run_ipm(H, f, ph, Ap, b, 1e-10, 200);
  z_cert = r.z.head(m);
  y_cert = A.rows() ? r.y : Vec();
  return r.x[n];
}

}  // namespace

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIter: return "max_iter";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "?";
}

double KktResiduals::max() const { return std::max({stationarity, primal, dual, complementarity}); }

void QpProblem::validate() const {
  const Eigen::Index n = f.size();
  if (H.rows() != n || H.cols() != n) throw ArgumentError("QpProblem: H must be n x n");
  if (A_ineq.rows() != b_ineq.size() || (A_ineq.rows() > 0 && A_ineq.cols() != n)) {
    throw ArgumentError("QpProblem: A_ineq/b_ineq shape mismatch");
  }
  if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n)) {
    throw ArgumentError("QpProblem: A_eq/b_eq shape mismatch");
  }
  if ((lower && lower->size() != n) || (upper && upper->size() != n)) {
    throw ArgumentError("QpProblem: bound vector size mismatch");
  }
  const double scale = 1.0 + (n ? H.cwiseAbs().maxCoeff() : 0.0);
  if (n && (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ArgumentError("QpProblem: H is not symmetric");
  }
  if (!H.allFinite() || !f.allFinite() || !A_ineq.allFinite() || !A_eq.allFinite() || !b_eq.allFinite()) {
    throw ArgumentError("QpProblem: non-finite data");
  }
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& sol) {
  const Eigen::Index n = p.num_vars();
  Mat H = p.H;
  H.diagonal().array() += sol.hessian_shift;
  const Vec& x = sol.x;
  Vec grad = H * x + p.f;
  const double gscale = std::max(inf_norm(Vec(H * x)), inf_norm(p.f));
  double mscale = 0.0;
  KktResiduals k;
  double viol = 0.0, comp = 0.0, neg = 0.0;
  double pscale = 0.0;
  auto check_row = [&](double lhs, double rhs, double mult) {
    if (!std::isfinite(rhs)) return;
    viol = std::max(viol, lhs - rhs);
    pscale = std::max({pscale, std::abs(lhs), std::abs(rhs)});
    neg = std::max(neg, -mult);
    comp = std::max(comp, std::abs(mult * (rhs - lhs)));
    mscale = std::max(mscale, std::abs(mult));
  };
  if (p.A_ineq.rows()) {
    const Vec Ax = p.A_ineq * x;
    const Vec term = p.A_ineq.transpose() * sol.lambda_ineq;
    grad += term;
    mscale = std::max(mscale, inf_norm(term));
    for (Eigen::Index r = 0; r < Ax.size(); ++r) check_row(Ax[r], p.b_ineq[r], sol.lambda_ineq[r]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.upper && std::isfinite((*p.upper)[i])) {
      grad[i] += sol.lambda_upper[i];
      check_row(x[i], (*p.upper)[i], sol.lambda_upper[i]);
    }
    if (p.lower && std::isfinite((*p.lower)[i])) {
      grad[i] -= sol.lambda_lower[i];
      check_row(-x[i], -(*p.lower)[i], sol.lambda_lower[i]);
    }
  }
  if (p.A_eq.rows()) {
    const Vec Ax = p.A_eq * x;
    const Vec term = p.A_eq.transpose() * sol.nu_eq;
    grad += term;
    mscale = std::max(mscale, inf_norm(term));
    viol = std::max(viol, inf_norm(Vec(Ax - p.b_eq)));
    pscale = std::max({pscale, inf_norm(Ax), inf_norm(p.b_eq)});
  }
  const double obj = 0.5 * x.dot(H * x) + p.f.dot(x);
  k.stationarity = inf_norm(grad) / (1.0 + std::max(gscale, mscale));
  k.primal = std::max(0.0, viol) / (1.0 + pscale);
  k.dual = neg / (1.0 + mscale);
  k.complementarity = comp / (1.0 + std::abs(obj));
  return k;
}

QpSolution solve_qp(const QpProblem& p, const QpSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  p.validate();
  const Eigen::Index n = p.num_vars();
  QpSolution sol;

  Mat H = p.H;
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(H, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    const double scale = 1.0 + H.cwiseAbs().maxCoeff();
    if (min_eig < -1e-8 * scale) {
      std::ostringstream msg;
      msg << "solve_qp: H is not positive semidefinite (min eigenvalue " << min_eig << ")";
      throw ArgumentError(msg.str());
    }
    if (min_eig < kShift) {
      H.diagonal().array() += kShift;
      sol.hessian_shift = kShift;
    }
  }

  const Stacked st = stack_inequalities(p);
  const Mat& A = p.A_eq;
  const Vec& b = p.b_eq;
  const Eigen::Index m = st.h.size();

  Vec x, z, y;
  if (m == 0) {
    // Equality-constrained (or unconstrained): one KKT solve.
    const Eigen::Index pe = A.rows();
    Mat K = Mat::Zero(n + pe, n + pe);
    K.topLeftCorner(n, n) = H;
    Vec rhs(n + pe);
    rhs.head(n) = -p.f;
    if (pe) {
      K.block(n, 0, pe, n) = A;
      K.block(0, n, n, pe) = A.transpose();
      rhs.tail(pe) = b;
    }
    Eigen::FullPivLU<Mat> lu(K);
    const Vec s = lu.solve(rhs);
    x = s.head(n);
    y = s.tail(pe);
    z = Vec();
    const bool consistent = s.allFinite() && (K * s - rhs).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + inf_norm(rhs));
    sol.status = consistent ? QpStatus::Optimal : QpStatus::Infeasible;
    sol.iterations = 1;
  } else {
    IpmResult r = run_ipm(H, p.f, st, A, b, settings.tol, settings.max_iter);
    x = r.x;
    z = r.z;
    y = r.y;
    sol.iterations = r.iterations;
    if (settings.polish && x.allFinite()) sol.polished = polish(H, p.f, st, A, b, r.s, x, z, y);
    const double res = kkt_max(stacked_kkt(H, p.f, st, A, b, x, z, y));
    sol.status = (res <= settings.tol) ? QpStatus::Optimal : QpStatus::MaxIter;
    if (sol.status != QpStatus::Optimal) {
      Vec zc, yc;
      const double t = phase_one(st, A, b, zc, yc);
      if (t > std::max(1e-7, settings.tol) * (1.0 + inf_norm(st.h))) {
        sol.status = QpStatus::Infeasible;
        const double zn = zc.lpNorm<1>() + (yc.size() ? yc.lpNorm<1>() : 0.0);
        Vec g = st.G.transpose() * zc;
        if (yc.size()) g += A.transpose() * yc;
        sol.certificate_residual = zn > 0.0 ? inf_norm(g) / zn : kInf;
      }
    }
  }

  sol.x = x;
  if (z.size() == 0) z = Vec::Zero(m);
  unstack_multipliers(p, st, z, sol);
  sol.nu_eq = y.size() == A.rows() ? y : Vec::Zero(A.rows());
  sol.objective = x.allFinite() ? 0.5 * x.dot(p.H * x) + p.f.dot(x) : kInf;
  sol.kkt_residual = sol.status == QpStatus::Infeasible ? kInf : kkt_residuals(p, sol).max();
  if (sol.status == QpStatus::Optimal && sol.kkt_residual > settings.tol) sol.status = QpStatus::MaxIter;
  sol.solve_time = std::chrono::steady_clock::now() - t0;
  return sol;
}

}  // namespace preftune
