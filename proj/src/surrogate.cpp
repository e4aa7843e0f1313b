#include "preftune/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "preftune/errors.hpp"
#include "rng.hpp"

namespace preftune {

SurrogateModel::SurrogateModel(RbfKind kind, double shape, std::vector<Vec> centers, Vec coeffs, double sigma)
    : kind_(kind), shape_(shape), sigma_(sigma), centers_(std::move(centers)), coeffs_(std::move(coeffs)) {
  if (!(shape_ > 0.0) || !std::isfinite(shape_)) throw ArgumentError("surrogate shape must be > 0");
  if (!(sigma_ > 0.0)) throw ArgumentError("surrogate sigma must be > 0");
  if (centers_.empty()) throw ArgumentError("surrogate needs at least one center");
  if (static_cast<std::size_t>(coeffs_.size()) != centers_.size()) {
    throw ArgumentError("surrogate coefficient count does not match center count");
  }
  center_set_ = kernels::CenterSet(centers_);
}

double SurrogateModel::operator()(std::span<const double> x) const {
  return kernels::rbf_weighted_sum(kind_, shape_, center_set_, x,
                                   {coeffs_.data(), static_cast<std::size_t>(coeffs_.size())});
}

double eval_surrogate(const SurrogateModel& m, const Vec& x_scaled) { return m(x_scaled); }

Mat rbf_matrix(RbfKind kind, double shape, std::span<const Vec> rows, std::span<const Vec> cols) {
  Mat out(rows.size(), cols.size());
  if (cols.empty()) return out;
  const kernels::CenterSet set(cols);
  std::vector<double> d(cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    kernels::squared_distances(set, {rows[i].data(), static_cast<std::size_t>(rows[i].size())}, d);
    for (std::size_t k = 0; k < cols.size(); ++k) out(i, k) = rbf_phi(kind, shape * d[k]);
  }
  return out;
}

void FitConfig::validate(std::size_t num_prefs) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("fit lambda must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("fit sigma must be > 0");
  if (!weights.empty() && weights.size() != num_prefs) {
    throw ArgumentError("fit weights must have one entry per preference");
  }
  for (double c : weights) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ArgumentError("fit weights must be > 0");
  }
}

PreferenceFit fit_preference_surrogate(std::span<const Vec> points, std::span<const PreferenceRecord> prefs,
                                       RbfKind kind, double shape, const FitConfig& cfg) {
  const std::size_t n = points.size();
  const std::size_t m = prefs.size();
  if (n < 2) throw ArgumentError("preference fit needs at least two samples");
  if (m < 1) throw ArgumentError("preference fit needs at least one preference");
  if (!(shape > 0.0)) throw ArgumentError("surrogate shape must be > 0");
  cfg.validate(m);
  for (const auto& p : prefs) {
    if (p.i >= n || p.j >= n || p.i == p.j) throw ArgumentError("preference indices out of range");
  }

  const Mat phi = rbf_matrix(kind, shape, points, points);

  // Work in beta' = beta / sigma, eps' = eps / sigma so the margins are 1.
  // With lambda > 0 the objective is further divided by lambda * sigma^2,
  // which keeps the beta block of the Hessian at the identity and makes the
  // solver's small PSD regularization irrelevant to the solution.
  const double sigma = cfg.sigma;
  const double slack_cost = cfg.lambda > 0.0 ? 1.0 / (cfg.lambda * sigma) : 1.0;
  const double beta_weight = cfg.lambda > 0.0 ? 1.0 : 0.0;

  std::size_t rows = 0;
  for (const auto& p : prefs) rows += p.b == Preference::Same ? 2 : 1;

  const Eigen::Index nv = static_cast<Eigen::Index>(n + m);
  QpProblem qp;
  qp.H = Mat::Zero(nv, nv);
  qp.H.topLeftCorner(n, n).diagonal().setConstant(beta_weight);
  qp.f = Vec::Zero(nv);
  for (std::size_t h = 0; h < m; ++h) {
    const double c = cfg.weights.empty() ? 1.0 : cfg.weights[h];
    qp.f(static_cast<Eigen::Index>(n + h)) = c * slack_cost;
  }
  qp.A_ineq = Mat::Zero(static_cast<Eigen::Index>(rows), nv);
  qp.b_ineq = Vec::Zero(static_cast<Eigen::Index>(rows));
  Eigen::Index r = 0;
  for (std::size_t h = 0; h < m; ++h) {
    const auto& p = prefs[h];
    const Vec diff = (phi.row(static_cast<Eigen::Index>(p.i)) - phi.row(static_cast<Eigen::Index>(p.j))).transpose();
    const Eigen::Index slack = static_cast<Eigen::Index>(n + h);
    switch (p.b) {
      case Preference::Better:  // J(i) <= J(j) - sigma + eps
        qp.A_ineq.row(r).head(n) = diff.transpose();
        qp.A_ineq(r, slack) = -1.0;
        qp.b_ineq(r++) = -1.0;
        break;
      case Preference::Worse:  // J(i) >= J(j) + sigma - eps
        qp.A_ineq.row(r).head(n) = -diff.transpose();
        qp.A_ineq(r, slack) = -1.0;
        qp.b_ineq(r++) = -1.0;
        break;
      case Preference::Same:  // |J(i) - J(j)| <= sigma + eps
        qp.A_ineq.row(r).head(n) = diff.transpose();
        qp.A_ineq(r, slack) = -1.0;
        qp.b_ineq(r++) = 1.0;
        qp.A_ineq.row(r).head(n) = -diff.transpose();
        qp.A_ineq(r, slack) = -1.0;
        qp.b_ineq(r++) = 1.0;
        break;
    }
  }
  Vec lower = Vec::Constant(nv, -std::numeric_limits<double>::infinity());
  lower.tail(m).setZero();
  qp.lower = lower;

  QpSettings settings;
  settings.tol = 1e-8;
  settings.max_iter = 200;
  const QpSolution sol = solve_qp(qp, settings);
  if (sol.status != QpStatus::Optimal) {
    throw FitError("preference fit: QP status " + std::string(to_string(sol.status)) +
                   ", kkt residual " + std::to_string(sol.kkt_residual) + ", iterations " +
                   std::to_string(sol.iterations));
  }

  Vec beta = sigma * sol.x.head(n);
  Vec slacks = (sigma * sol.x.tail(m)).cwiseMax(0.0);
  std::vector<Vec> centers(points.begin(), points.end());
  return PreferenceFit{SurrogateModel(kind, shape, std::move(centers), std::move(beta), sigma), std::move(slacks),
                       sol.status, sol.kkt_residual, sol.iterations};
}

PreferenceFit fit_preference_surrogate(const PreferenceDataset& ds, const ParamSpace& space, RbfKind kind,
                                       double shape, const FitConfig& cfg) {
  const std::vector<Vec> pts = scaled_samples(ds, space);
  return fit_preference_surrogate(pts, ds.prefs(), kind, shape, cfg);
}

SurrogateModel fit_value_surrogate(std::span<const Vec> points, std::span<const double> values, RbfKind kind,
                                   double shape, double lambda, double sigma) {
  const std::size_t n = points.size();
  if (n < 1) throw ArgumentError("value fit needs at least one sample");
  if (values.size() != n) throw ArgumentError("value fit: one value per sample required");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("value fit lambda must be >= 0");
  for (double v : values) {
    if (!std::isfinite(v)) throw ArgumentError("value fit: values must be finite");
  }
  const Mat phi = rbf_matrix(kind, shape, points, points);
  const Eigen::Map<const Vec> y(values.data(), static_cast<Eigen::Index>(n));
  const Eigen::Index ni = static_cast<Eigen::Index>(n);

  Vec beta;
  if (lambda > 0.0) {
    // Ridge via QR of [Phi; sqrt(lambda) I] (avoids squaring the condition number).
    Mat a(2 * ni, ni);
    a.topRows(ni) = phi;
    a.bottomRows(ni) = std::sqrt(lambda) * Mat::Identity(ni, ni);
    Vec rhs = Vec::Zero(2 * ni);
    rhs.head(ni) = y;
    beta = a.colPivHouseholderQr().solve(rhs);
  } else {
    Eigen::FullPivLU<Mat> lu(phi);
    if (!lu.isInvertible()) throw FitError("value fit: singular Gram matrix with lambda = 0");
    beta = lu.solve(y);
  }
  if (!beta.allFinite()) throw FitError("value fit: non-finite coefficients");
  std::vector<Vec> centers(points.begin(), points.end());
  return SurrogateModel(kind, shape, std::move(centers), std::move(beta), sigma);
}

std::vector<double> default_shape_grid(double current) {
  if (!(current > 0.0) || !std::isfinite(current)) throw ArgumentError("shape must be > 0");
  std::vector<double> grid;
  for (double f : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    const double v = std::clamp(f * current, 1e-3, 1e3);
    if (grid.empty() || grid.back() != v) grid.push_back(v);
  }
  return grid;
}

namespace {

std::vector<std::vector<std::size_t>> make_folds(std::size_t count, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  detail::Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t p = 0; p < count; ++p) folds[p % k].push_back(order[p]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

bool reproduces(const SurrogateModel& model, std::span<const Vec> points, const PreferenceRecord& p) {
  const double diff = model(points[p.i]) - model(points[p.j]);
  switch (p.b) {
    case Preference::Better: return diff < 0.0;
    case Preference::Worse: return diff > 0.0;
    case Preference::Same: return std::abs(diff) <= model.sigma();
  }
  return false;
}

double pick_smallest_best(std::span<const double> grid, const std::vector<double>& score, bool maximize) {
  double best_eps = 0.0;
  double best_score = 0.0;
  bool have = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double s = score[g];
    const bool better = !have || (maximize ? s > best_score : s < best_score) ||
                        (s == best_score && grid[g] < best_eps);
    if (better) {
      best_eps = grid[g];
      best_score = s;
      have = true;
    }
  }
  return best_eps;
}

}  // namespace

double cross_validate_shape(std::span<const Vec> points, std::span<const PreferenceRecord> prefs, RbfKind kind,
                            std::span<const double> grid, std::size_t folds, const FitConfig& cfg,
                            std::uint64_t seed) {
  if (grid.empty()) throw ArgumentError("cross-validation grid is empty");
  if (folds < 2) throw ArgumentError("cross-validation needs at least 2 folds");
  if (prefs.size() < folds) throw ArgumentError("cross-validation needs at least as many preferences as folds");
  for (double e : grid) {
    if (!(e > 0.0)) throw ArgumentError("shape candidates must be > 0");
  }
  if (grid.size() == 1) return grid[0];

  const auto fold_sets = make_folds(prefs.size(), folds, seed);
  std::vector<double> score(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<PreferenceRecord> train;
      std::vector<double> weights;
      for (std::size_t o = 0; o < folds; ++o) {
        if (o == f) continue;
        for (std::size_t h : fold_sets[o]) {
          train.push_back(prefs[h]);
          if (!cfg.weights.empty()) weights.push_back(cfg.weights[h]);
        }
      }
      FitConfig sub = cfg;
      sub.weights = std::move(weights);
      try {
        const PreferenceFit fit = fit_preference_surrogate(points, train, kind, grid[g], sub);
        for (std::size_t h : fold_sets[f]) {
          if (reproduces(fit.model, points, prefs[h])) score[g] += 1.0;
        }
      } catch (const FitError&) {
        // A candidate whose fit fails scores nothing on this fold.
      }
    }
  }
  return pick_smallest_best(grid, score, true);
}

double cross_validate_shape_values(std::span<const Vec> points, std::span<const double> values, RbfKind kind,
                                   std::span<const double> grid, std::size_t folds, double lambda,
                                   std::uint64_t seed) {
  if (grid.empty()) throw ArgumentError("cross-validation grid is empty");
  if (folds < 2) throw ArgumentError("cross-validation needs at least 2 folds");
  if (points.size() != values.size()) throw ArgumentError("one value per sample required");
  if (points.size() < folds) throw ArgumentError("cross-validation needs at least as many samples as folds");
  if (grid.size() == 1) return grid[0];

  const auto fold_sets = make_folds(points.size(), folds, seed);
  std::vector<double> score(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<Vec> train_pts;
      std::vector<double> train_vals;
      for (std::size_t o = 0; o < folds; ++o) {
        if (o == f) continue;
        for (std::size_t i : fold_sets[o]) {
          train_pts.push_back(points[i]);
          train_vals.push_back(values[i]);
        }
      }
      try {
        const SurrogateModel model = fit_value_surrogate(train_pts, train_vals, kind, grid[g], lambda);
        for (std::size_t i : fold_sets[f]) {
          const double e = model(points[i]) - values[i];
          score[g] += e * e;
        }
      } catch (const FitError&) {
        score[g] = std::numeric_limits<double>::infinity();
      }
    }
  }
  return pick_smallest_best(grid, score, false);
}

}  // namespace preftune
