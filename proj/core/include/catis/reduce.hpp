#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "catis/diagnostics.hpp"
#include "catis/scoring.hpp"
#include "catis/tokens.hpp"
#include "catis/triage.hpp"

namespace catis {

/// Bipartite merge decisions: each pair folds `src` into `dst`. A src appears
/// once and is never a dst; several sources may share a destination.
struct MergePlan {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (src row, dst row)

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
};

/// Number of merges a pool of `pool_size` tokens can supply: the size of the
/// even-position side, provided the odd side is non-empty.
std::size_t merge_capacity(std::size_t pool_size) noexcept;

/// ToMe-style matching restricted to `pool`. The pool is sorted; even
/// positions form side A and odd positions side B. Each A token links to its
/// most similar B token (ties go to the lower B row), and the r_m strongest
/// links become merges (ties go to the lower A row).
MergePlan bipartite_match(const TokenPopulation& pop, std::span<const std::size_t> pool,
                          std::size_t r_m, SimilarityKind kind = SimilarityKind::kCosine);

/// Folds each source into its destination by size-weighted averaging. Sizes
/// add, provenance unions, source rows disappear, and row order is otherwise
/// kept.
TokenPopulation apply_merge(const TokenPopulation& pop, const MergePlan& plan);

/// Drops the given rows. Survivors are copied unchanged.
TokenPopulation apply_evict(const TokenPopulation& pop, std::span<const std::size_t> victims);

/// Merge-only baseline: bipartite matching over every patch token.
TokenPopulation tome_layer(const TokenPopulation& pop, std::size_t r,
                           SimilarityKind kind = SimilarityKind::kCosine);

/// Ablation: evict the r lowest-scoring patch tokens, no protection.
TokenPopulation topk_evict_layer(const TokenPopulation& pop, const ImportanceScores& scores,
                                 std::size_t r);

/// Ablation: bipartite matching over the 2r lowest-scoring patch tokens,
/// merging r pairs, no protection.
TokenPopulation topk_merge_layer(const TokenPopulation& pop, const ImportanceScores& scores,
                                 std::size_t r, SimilarityKind kind = SimilarityKind::kCosine);

struct TriageParams {
  double tau = 1.0;
  double evict_ratio = 0.5;
  SimilarityKind kind = SimilarityKind::kCosine;
};

struct CatisLayerResult {
  TokenPopulation population;
  TriagePartition partition;
  ImportanceScores scores;
  MergePlan plan;
  IndexSet evicted;  // rows of the input population
};

/// Score, triage, then reduce: protected tokens pass through untouched, the
/// r_e lowest-scoring members of E are evicted, and r_m merges happen inside
/// M. If M cannot supply r_m merges, the lowest-scoring members of M are
/// evicted instead until it can; if that still fails, CapacityError.
CatisLayerResult catis_layer(const LayerScoringContext& ctx, const ScoringParams& sp,
                             const TriageParams& tp, std::size_t r);

}  // namespace catis
