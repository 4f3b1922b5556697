#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace catis {

/// Distortion-rate coupling eps(Delta). Either linear, eps0 + alpha * Delta,
/// or a tabulated monotone non-decreasing curve with linear interpolation
/// (flat beyond the table ends).
class Coupling {
 public:
  static Coupling linear();
  /// Points must be sorted by Delta (strictly increasing) with non-decreasing
  /// eps; checked on construction.
  static Coupling tabulated(std::vector<std::pair<double, double>> points);
  /// Samples `fn` on `grid` and tabulates it. Rejects non-monotone samples.
  template <class Fn>
  static Coupling sample(Fn&& fn, std::span<const double> grid) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(grid.size());
    for (double x : grid) pts.emplace_back(x, fn(x));
    return tabulated(std::move(pts));
  }

  bool is_linear() const noexcept { return table_.empty(); }
  const std::vector<std::pair<double, double>>& table() const noexcept { return table_; }

  /// Evaluates eps(delta); the linear form uses eps0 and alpha from the caller.
  double operator()(double delta, double eps0, double alpha) const;

 private:
  std::vector<std::pair<double, double>> table_;
};

struct RecurrenceConfig {
  double epsilon0 = 0.1;  // baseline distortion rate
  double alpha = 0.0;     // feedback coupling strength
  double delta = 0.1;     // per-operation damage intensity
  double r = 1.0;         // per-layer reduction (continuous)
  std::size_t L = 12;     // depth
  double T = 1.0;         // collapse threshold
  Coupling coupling = Coupling::linear();

  void validate() const;
};

/// Cumulative distortion entering each layer; deltas[0] = 0, size L + 1.
struct Trajectory {
  std::vector<double> deltas;

  double final_value() const { return deltas.back(); }
};

/// Values beyond this raise DivergenceError.
inline constexpr double kDivergenceCutoff = 1e300;

/// Iterates Delta(l+1) = Delta(l) + eps(Delta(l)) * r * delta for L layers.
Trajectory simulate(const RecurrenceConfig& cfg);

/// (eps0 / alpha) * (beta^l - 1), beta = 1 + alpha r delta. Linear coupling
/// with alpha > 0 only.
double closed_form(const RecurrenceConfig& cfg, std::size_t l);

/// Solves beta^L = 1 + alpha T / eps0 exactly for r. With alpha == 0 the
/// recurrence is linear and the exact answer is T / (eps0 delta L).
double r_crit_exact(const RecurrenceConfig& cfg);

/// First-order approximation ln(1 + alpha T / eps0) / (alpha delta L), valid
/// when alpha r delta << 1. Falls back to the alpha -> 0 limit.
double r_crit_approx(const RecurrenceConfig& cfg);

struct LayerBudget {
  double r_m = 0.0;
  double r_e = 0.0;
  double f_p = 0.0;
};

/// Separate merge and evict channels with their own rates and intensities.
/// Each channel uses the shared coupling shape: linear eps_x0 + alpha Delta
/// or the tabulated curve.
struct DualChannelConfig {
  double eps_m0 = 0.1;
  double eps_e0 = 0.1;
  double alpha = 0.0;
  double delta_m = 0.1;
  double delta_e = 0.1;
  double r = 1.0;
  std::size_t L = 12;
  double T = 1.0;
  Coupling coupling = Coupling::linear();
  std::vector<LayerBudget> schedule;  // one entry per layer

  void validate() const;

  /// Schedule where every layer splits r into (r_m, r_e) after protecting f_p.
  static std::vector<LayerBudget> uniform_schedule(std::size_t L, double r, double f_p,
                                                   double evict_share);
};

/// Delta(l+1) = Delta(l) + eps_m(Delta) r_m delta_m + eps_e(Delta) r_e delta_e.
Trajectory simulate_dual(const DualChannelConfig& cfg);

struct InverseDepthFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  /// Fewer than three distinct depths: the fit is exact by construction.
  bool underdetermined = false;
};

/// OLS of r_crit against 1/L over (L, r_crit) points.
InverseDepthFit fit_inverse_depth(std::span<const std::pair<std::size_t, double>> points);

}  // namespace catis
