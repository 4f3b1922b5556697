#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catis/linear_fit.hpp"
#include "catis/tokens.hpp"

namespace catis {

enum class SimilarityKind { kCosine, kDot };

const char* to_string(SimilarityKind kind) noexcept;
SimilarityKind parse_similarity_kind(const std::string& name);

/// Symmetric N_p x N_p similarity over patch tokens (CLS excluded).
struct SimilarityMatrix {
  Eigen::MatrixXd values;
  SimilarityKind kind = SimilarityKind::kCosine;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.rows()); }
};

/// Pairwise similarity of the patch tokens. Requires at least two patch
/// tokens; under cosine, a zero-norm token is a DegenerateInputError.
SimilarityMatrix pairwise_similarity(const TokenPopulation& pop, SimilarityKind kind);

/// Same, restricted to the given rows of `pop` (in the given order).
SimilarityMatrix pairwise_similarity(const TokenPopulation& pop, std::span<const std::size_t> rows,
                                     SimilarityKind kind);

/// Average (tie-aware) 1-based ranks.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman correlation: Pearson correlation of average ranks. Throws
/// UndefinedStatisticError when either ranking is constant.
double spearman_rho(std::span<const double> a, std::span<const double> b);

/// Strict upper triangle, row by row.
std::vector<double> upper_triangle(const SimilarityMatrix& s);

/// Spearman correlation of the strict upper triangles of two similarity
/// matrices of the same shape and kind.
double ranking_consistency(const SimilarityMatrix& clean, const SimilarityMatrix& corrupted);

/// ||clean - corrupted||_F.
double frobenius_distance(const SimilarityMatrix& clean, const SimilarityMatrix& corrupted);

/// Mean absolute off-diagonal Pearson correlation between feature dimensions,
/// computed across patch tokens. Needs N_p >= 3, d >= 2, and no constant
/// dimension.
double rho_off(const TokenPopulation& pop);

/// Ranking consistency restricted to a pool of rows (shared between both
/// populations). |pool| >= 3.
double pool_rho_s(const TokenPopulation& clean, const TokenPopulation& corrupted,
                  std::span<const std::size_t> pool, SimilarityKind kind = SimilarityKind::kCosine);

enum class EnergySignal { kPairwiseCosine, kPairwiseDot, kUnaryNormF };

const char* to_string(EnergySignal signal) noexcept;

/// Monte-Carlo estimate of the total perturbation energy
///   V = sum over scores of E[(s_perturbed - s)^2]
/// under i.i.d. isotropic Gaussian per-token perturbations with per-component
/// standard deviation `sigma`. Pairwise signals sum over unordered pairs
/// i < j; the unary signal recomputes norm_F (population mean and std
/// included) on the perturbed population and sums over tokens.
///
/// Draws are keyed by (seed, token row, iteration), so the result does not
/// depend on evaluation order or thread count.
double perturbation_energy(const TokenPopulation& pop, EnergySignal signal, double sigma,
                           std::size_t n_mc, std::uint64_t seed, double sigma_floor = 1e-6);

struct EnergyPoint {
  std::size_t np = 0;
  double v_pair = 0.0;
  double v_unary = 0.0;
};

struct EnergySweep {
  LineFit fit;  // log(V_pair / V_unary) against log(N_p)
  std::vector<EnergyPoint> points;
  /// True when some energy is at or below the resolution floor, so the
  /// log-ratio fit carries no information.
  bool degenerate = false;
};

inline constexpr double kEnergyFloor = 1e-18;

/// For each N_p draws an i.i.d. standard-normal population (d features), then
/// measures V_pair (pairwise cosine) and V_unary (norm_F) and fits the
/// log-log slope of their ratio against N_p.
EnergySweep energy_gap_sweep(std::span<const std::size_t> np_list, std::size_t d, double sigma,
                             std::size_t n_mc, std::uint64_t seed);

struct LayerDiagnostics {
  std::size_t layer = 0;
  double rho_s = 0.0;
  double delta_f = 0.0;
  double rho_off = 0.0;
  std::optional<double> pool_rho_s;
};

struct EnergyMeasurement {
  double v_pair = 0.0;
  double v_unary = 0.0;
  std::size_t np = 0;
};

struct DiagnosticsReport {
  std::vector<LayerDiagnostics> per_layer;
  std::optional<EnergyMeasurement> energy;
  SimilarityKind kind = SimilarityKind::kCosine;
  /// Which feature matrix the similarity was computed on.
  std::string feature_source = "trace-features";
};

/// Range checks for every statistic in the report; throws ValidationError.
void validate_report(const DiagnosticsReport& report);

}  // namespace catis
