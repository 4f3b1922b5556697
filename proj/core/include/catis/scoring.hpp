#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "catis/tokens.hpp"

namespace catis {

/// Parameters of the fused unary importance functional. There are no
/// universal defaults for gamma, w_cls or l_start; callers choose them per
/// model family.
struct ScoringParams {
  double gamma = 0.0;        // momentum coefficient, >= 0
  double w_cls = 0.0;        // fusion weight in [0,1]
  std::size_t l_start = 1;   // first layer at which the attention branch is used
  double sigma_floor = 1e-6; // lower bound on per-dimension std in norm_f

  void validate() const;
};

/// Everything the scorer needs at one layer. Attention vectors, when present,
/// cover the population's patch tokens and sum to 1.
struct LayerScoringContext {
  const TokenPopulation& population;
  std::optional<std::vector<double>> cls_attn;
  std::optional<std::vector<double>> prev_cls_attn;  // aligned to current tokens
  std::size_t layer = 0;

  void validate() const;
};

/// Diagonal Mahalanobis distance of each patch token from the patch
/// population: || (z_i - mu) / max(sigma, sigma_floor) ||_2, with population
/// (1/N) statistics. Needs >= 2 patch tokens.
ImportanceScores norm_f(const TokenPopulation& pop, double sigma_floor = 1e-6);

/// (1 + gamma) * a_l - gamma * a_prev.
std::vector<double> momentum_cls(std::span<const double> a_l, std::span<const double> a_prev,
                                 double gamma);

/// Per-vector z-score with population std. A zero-spread input returns all
/// zeros with `degenerate` set instead of failing.
ImportanceScores zscore(const ImportanceScores& scores);

/// w * cls + (1 - w) * nf. Both inputs must be standardized.
ImportanceScores fuse(const ImportanceScores& cls_hat, const ImportanceScores& nf_hat, double w_cls);

/// Full scoring functional for one layer. Uses only zscore(norm_f) below
/// l_start or when attention is missing; otherwise fuses it with the
/// standardized momentum-corrected CLS attention.
ImportanceScores catis_score(const LayerScoringContext& ctx, const ScoringParams& params);

/// For each patch token of `after`, the patch rows of `before` that it was
/// built from (itself if it survived, all constituents if it was merged).
/// Matched through provenance; both populations must share patch indexing.
std::vector<IndexSet> trace_origins(const TokenPopulation& before, const TokenPopulation& after);

/// Carries a previous-layer attention vector (over `before`'s patch tokens)
/// onto the patch tokens of `after`: survivors keep their own value, merged
/// tokens take the size-weighted mean of their constituents. The result is
/// renormalized to sum 1 so evicted mass does not leak into the momentum term.
std::vector<double> inherit_attention(std::span<const double> prev_attention,
                                      const TokenPopulation& before, const TokenPopulation& after);

}  // namespace catis
