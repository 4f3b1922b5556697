#include "catis/recurrence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "catis/error.hpp"
#include "catis/linear_fit.hpp"

namespace catis {
namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be > 0");
}

double step_or_throw(double next, std::size_t layer) {
  if (!std::isfinite(next) || next > kDivergenceCutoff) {
    throw DivergenceError("distortion diverged after layer " + std::to_string(layer), layer);
  }
  return next;
}

}  // namespace

Coupling Coupling::linear() { return Coupling{}; }

Coupling Coupling::tabulated(std::vector<std::pair<double, double>> points) {
  if (points.empty()) throw ValidationError("tabulated coupling needs at least one point");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [x, y] = points[i];
    if (!std::isfinite(x) || !std::isfinite(y) || y < 0.0) {
      throw ValidationError("tabulated coupling: non-finite or negative entry");
    }
    if (i > 0) {
      if (!(x > points[i - 1].first)) {
        throw ValidationError("tabulated coupling: Delta values must increase strictly");
      }
      if (y < points[i - 1].second) {
        throw ValidationError("tabulated coupling is not monotone non-decreasing");
      }
    }
  }
  Coupling c;
  c.table_ = std::move(points);
  return c;
}

double Coupling::operator()(double delta, double eps0, double alpha) const {
  if (table_.empty()) return eps0 + alpha * delta;
  if (delta <= table_.front().first) return table_.front().second;
  if (delta >= table_.back().first) return table_.back().second;
  const auto hi = std::upper_bound(table_.begin(), table_.end(), delta,
                                   [](double v, const auto& p) { return v < p.first; });
  const auto lo = hi - 1;
  const double t = (delta - lo->first) / (hi->first - lo->first);
  return lo->second + t * (hi->second - lo->second);
}

void RecurrenceConfig::validate() const {
  require_positive(epsilon0, "epsilon0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be >= 0");
  require_positive(delta, "delta");
  require_positive(r, "r");
  require_positive(T, "T");
  if (L < 1) throw ValidationError("L must be positive");
}

Trajectory simulate(const RecurrenceConfig& cfg) {
  cfg.validate();
  Trajectory t;
  t.deltas.reserve(cfg.L + 1);
  t.deltas.push_back(0.0);
  double d = 0.0;
  for (std::size_t l = 0; l < cfg.L; ++l) {
    const double eps = cfg.coupling(d, cfg.epsilon0, cfg.alpha);
    d = step_or_throw(d + eps * cfg.r * cfg.delta, l);
    t.deltas.push_back(d);
  }
  return t;
}

double closed_form(const RecurrenceConfig& cfg, std::size_t l) {
  cfg.validate();
  if (!cfg.coupling.is_linear()) throw ValidationError("closed form needs linear coupling");
  if (cfg.alpha == 0.0) throw ValidationError("closed form undefined for alpha = 0; use simulate");
  const double x = cfg.alpha * cfg.r * cfg.delta;
  // beta^l - 1 computed as expm1(l log1p(x)) to stay accurate for small x
  return cfg.epsilon0 / cfg.alpha * std::expm1(static_cast<double>(l) * std::log1p(x));
}

double r_crit_exact(const RecurrenceConfig& cfg) {
  cfg.validate();
  if (!cfg.coupling.is_linear()) throw ValidationError("r_crit needs linear coupling");
  const double depth = static_cast<double>(cfg.L);
  if (cfg.alpha == 0.0) return cfg.T / (cfg.epsilon0 * cfg.delta * depth);
  const double beta_minus_one = std::expm1(std::log1p(cfg.alpha * cfg.T / cfg.epsilon0) / depth);
  return beta_minus_one / (cfg.alpha * cfg.delta);
}

double r_crit_approx(const RecurrenceConfig& cfg) {
  cfg.validate();
  if (!cfg.coupling.is_linear()) throw ValidationError("r_crit needs linear coupling");
  const double depth = static_cast<double>(cfg.L);
  if (cfg.alpha == 0.0) return cfg.T / (cfg.epsilon0 * cfg.delta * depth);
  return std::log1p(cfg.alpha * cfg.T / cfg.epsilon0) / (cfg.alpha * cfg.delta * depth);
}

void DualChannelConfig::validate() const {
  require_positive(eps_m0, "eps_m0");
  require_positive(eps_e0, "eps_e0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be >= 0");
  require_positive(delta_m, "delta_m");
  require_positive(delta_e, "delta_e");
  if (delta_e > delta_m) throw ValidationError("delta_e must not exceed delta_m");
  require_positive(r, "r");
  require_positive(T, "T");
  if (L < 1) throw ValidationError("L must be positive");
  if (schedule.size() != L) throw ValidationError("schedule length must equal L");
  for (std::size_t l = 0; l < L; ++l) {
    const auto& b = schedule[l];
    if (b.r_m < 0.0 || b.r_e < 0.0 || b.f_p < 0.0 || b.f_p > 1.0) {
      throw ValidationError("schedule entry " + std::to_string(l) + " out of range");
    }
    if (std::abs(b.r_m + b.r_e - r * (1.0 - b.f_p)) > 1e-9) {
      throw ValidationError("schedule entry " + std::to_string(l) +
                            ": r_m + r_e must equal r (1 - f_p)");
    }
  }
}

std::vector<LayerBudget> DualChannelConfig::uniform_schedule(std::size_t L, double r, double f_p,
                                                             double evict_share) {
  const double active = r * (1.0 - f_p);
  const double r_e = active * evict_share;
  return std::vector<LayerBudget>(L, LayerBudget{active - r_e, r_e, f_p});
}

Trajectory simulate_dual(const DualChannelConfig& cfg) {
  cfg.validate();
  Trajectory t;
  t.deltas.reserve(cfg.L + 1);
  t.deltas.push_back(0.0);
  double d = 0.0;
  for (std::size_t l = 0; l < cfg.L; ++l) {
    const auto& b = cfg.schedule[l];
    const double merge = cfg.coupling(d, cfg.eps_m0, cfg.alpha) * b.r_m * cfg.delta_m;
    const double evict = cfg.coupling(d, cfg.eps_e0, cfg.alpha) * b.r_e * cfg.delta_e;
    d = step_or_throw(d + merge + evict, l);
    t.deltas.push_back(d);
  }
  return t;
}

InverseDepthFit fit_inverse_depth(std::span<const std::pair<std::size_t, double>> points) {
  std::vector<double> x, y;
  for (const auto& [depth, rc] : points) {
    if (depth < 1) throw ValidationError("depth must be positive");
    if (!std::isfinite(rc)) throw ValidationError("r_crit must be finite");
    x.push_back(1.0 / static_cast<double>(depth));
    y.push_back(rc);
  }
  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw ValidationError("inverse-depth fit needs >= 2 distinct depths");

  const LineFit line = fit_line(x, y);
  InverseDepthFit fit;
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.r2 = line.r2;
  fit.underdetermined = distinct.size() < 3;
  return fit;
}

}  // namespace catis
