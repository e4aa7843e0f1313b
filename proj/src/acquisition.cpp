#include "preftune/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "preftune/errors.hpp"
#include "rng.hpp"

namespace preftune {

void PsoConfig::validate() const {
  if (swarm_size < 2) throw ArgumentError("PSO swarm size must be >= 2");
  if (max_iters < 1) throw ArgumentError("PSO needs at least one iteration");
  if (!std::isfinite(inertia) || !std::isfinite(cognitive) || !std::isfinite(social)) {
    throw ArgumentError("PSO coefficients must be finite");
  }
}

double idw_z(std::span<const double> x, const kernels::CenterSet& samples) {
  if (samples.count() == 0) throw ArgumentError("idw_z needs at least one sample");
  const kernels::IdwSums s = kernels::idw_sums(samples, x);
  if (s.min_sq_norm < kCoincidenceTol * kCoincidenceTol) return 0.0;
  return std::atan(1.0 / s.weight_sum);
}

double idw_z(const Vec& x, std::span<const Vec> samples) {
  if (samples.empty()) throw ArgumentError("idw_z needs at least one sample");
  const kernels::CenterSet set(samples);
  return idw_z(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), set);
}

double delta_J(const SurrogateModel& m, std::span<const Vec> samples) {
  if (samples.empty()) throw ArgumentError("delta_J needs at least one sample");
  double lo = m(samples[0]);
  double hi = lo;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double v = m(samples[i]);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return std::max(hi - lo, m.sigma());
}

Acquisition::Acquisition(const SurrogateModel& model, AcquisitionConfig cfg)
    : model_(&model), cfg_(cfg), range_(delta_J(model, model.centers())) {
  if (!(cfg_.delta >= 0.0) || !std::isfinite(cfg_.delta)) throw ArgumentError("delta must be >= 0");
}

double Acquisition::operator()(std::span<const double> x) const {
  const double j = (*model_)(x);
  if (cfg_.delta == 0.0) return j / range_;
  return j / range_ - cfg_.delta * idw_z(x, model_->center_set());
}

double acquisition(const Vec& x, const SurrogateModel& m, AcquisitionConfig cfg) {
  return Acquisition(m, cfg)(x);
}

PsoResult pso_minimize(const Objective& f, std::size_t dim, const PsoConfig& cfg) {
  cfg.validate();
  if (dim < 1) throw ArgumentError("PSO dimension must be >= 1");
  const double lo = -1.0;
  const double hi = 1.0;
  const double vmax = 0.5 * (hi - lo);
  const std::size_t n = cfg.swarm_size;
  const Eigen::Index d = static_cast<Eigen::Index>(dim);

  auto eval = [&](const Vec& x) {
    const double v = f(std::span<const double>(x.data(), dim));
    if (!std::isfinite(v)) throw OptimizationError("PSO objective returned a non-finite value");
    return v;
  };

  detail::Rng rng(cfg.seed);
  std::vector<Vec> pos(n, Vec(d));
  std::vector<Vec> vel(n, Vec(d));
  for (std::size_t p = 0; p < n; ++p) {
    for (Eigen::Index k = 0; k < d; ++k) {
      pos[p](k) = rng.uniform(lo, hi);
      vel[p](k) = rng.uniform(-vmax, vmax);
    }
  }
  PsoResult res;
  res.personal_best = pos;
  res.personal_value.resize(n);
  std::size_t best = 0;
  for (std::size_t p = 0; p < n; ++p) {
    res.personal_value[p] = eval(pos[p]);
    if (res.personal_value[p] < res.personal_value[best]) best = p;
  }
  Vec gbest = res.personal_best[best];
  double gval = res.personal_value[best];

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    for (std::size_t p = 0; p < n; ++p) {
      for (Eigen::Index k = 0; k < d; ++k) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        double v = cfg.inertia * vel[p](k) + cfg.cognitive * r1 * (res.personal_best[p](k) - pos[p](k)) +
                   cfg.social * r2 * (gbest(k) - pos[p](k));
        v = std::clamp(v, -vmax, vmax);
        double x = pos[p](k) + v;
        if (x < lo || x > hi) {
          x = std::clamp(x, lo, hi);
          v = 0.0;
        }
        pos[p](k) = x;
        vel[p](k) = v;
      }
    }
    // Evaluate the whole swarm, then update bests (synchronous swarm).
    for (std::size_t p = 0; p < n; ++p) {
      const double v = eval(pos[p]);
      if (v < res.personal_value[p]) {
        res.personal_value[p] = v;
        res.personal_best[p] = pos[p];
      }
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (res.personal_value[p] < gval) {
        gval = res.personal_value[p];
        gbest = res.personal_best[p];
      }
    }
  }
  res.x = gbest;
  res.value = gval;
  return res;
}

}  // namespace preftune
