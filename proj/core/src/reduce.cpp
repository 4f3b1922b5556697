#include "catis/reduce.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "catis/error.hpp"

namespace catis {
namespace {

void require_patch_row(const TokenPopulation& pop, std::size_t row, const char* what) {
  if (row >= pop.rows()) {
    throw ValidationError(std::string(what) + ": row " + std::to_string(row) + " out of range");
  }
  if (row < pop.first_patch()) {
    throw ValidationError(std::string(what) + ": the CLS token cannot be reduced");
  }
}

void require_aligned(const TokenPopulation& pop, const ImportanceScores& scores) {
  if (scores.size() != pop.patch_count() || scores.first_row != pop.first_patch()) {
    throw ValidationError("scores are not aligned with the population's patch tokens");
  }
}

// Rows of `candidates` ordered by ascending score, ties by row.
IndexSet by_score(const ImportanceScores& scores, IndexSet candidates) {
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return scores.values[a - scores.first_row] < scores.values[b - scores.first_row];
  });
  return candidates;
}

// One pass that evicts `victims` and applies `plan`.
TokenPopulation reduce_rows(const TokenPopulation& pop, std::span<const std::size_t> victims,
                            const MergePlan& plan) {
  const std::size_t n = pop.rows();
  enum class Fate { kKeep, kEvict, kSource };
  std::vector<Fate> fate(n, Fate::kKeep);
  for (auto v : victims) {
    require_patch_row(pop, v, "evict");
    if (fate[v] != Fate::kKeep) throw ValidationError("duplicate eviction of row " + std::to_string(v));
    fate[v] = Fate::kEvict;
  }
  std::map<std::size_t, IndexSet> sources_of;  // dst -> sorted srcs
  for (const auto& [src, dst] : plan.pairs) {
    require_patch_row(pop, src, "merge");
    require_patch_row(pop, dst, "merge");
    if (src == dst) throw ValidationError("merge pair maps a row onto itself");
    if (fate[src] != Fate::kKeep) {
      throw ValidationError("row " + std::to_string(src) + " is reduced twice");
    }
    fate[src] = Fate::kSource;
    sources_of[dst].push_back(src);
  }
  for (auto& [dst, srcs] : sources_of) {
    if (fate[dst] != Fate::kKeep) {
      throw ValidationError("merge destination " + std::to_string(dst) + " is also reduced");
    }
    std::sort(srcs.begin(), srcs.end());
  }

  std::size_t kept_patches = 0;
  for (std::size_t i = pop.first_patch(); i < n; ++i) kept_patches += fate[i] == Fate::kKeep;
  if (kept_patches == 0) throw ValidationError("reduction would remove every patch token");

  const std::size_t out_rows = pop.first_patch() + kept_patches;
  FeatureMatrix features(static_cast<Eigen::Index>(out_rows), pop.features().cols());
  std::vector<std::uint32_t> sizes;
  std::vector<IndexSet> prov;
  sizes.reserve(out_rows);
  prov.reserve(out_rows);
  Eigen::Index out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (fate[i] != Fate::kKeep) continue;
    const auto row = static_cast<Eigen::Index>(i);
    features.row(out) = pop.features().row(row);
    std::uint32_t size = pop.sizes()[i];
    IndexSet p = pop.provenance()[i];
    if (auto it = sources_of.find(i); it != sources_of.end()) {
      std::uint32_t total = size;
      for (auto s : it->second) total += pop.sizes()[s];
      // z_dst + sum_s (n_s / N)(z_s - z_dst): the size-weighted mean, written
      // so that identical constituents leave z_dst bit-for-bit unchanged.
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(features.cols());
      for (auto s : it->second) {
        const double w = static_cast<double>(pop.sizes()[s]) / static_cast<double>(total);
        acc += w * (pop.features().row(static_cast<Eigen::Index>(s)) - pop.features().row(row));
      }
      features.row(out) += acc;
      for (auto s : it->second) {
        const auto& sp = pop.provenance()[s];
        p.insert(p.end(), sp.begin(), sp.end());
      }
      std::sort(p.begin(), p.end());
      size = total;
    }
    sizes.push_back(size);
    prov.push_back(std::move(p));
    ++out;
  }
  return TokenPopulation(std::move(features), std::move(sizes), std::move(prov), pop.has_cls());
}

}  // namespace

std::size_t merge_capacity(std::size_t pool_size) noexcept {
  return pool_size >= 2 ? (pool_size + 1) / 2 : 0;
}

MergePlan bipartite_match(const TokenPopulation& pop, std::span<const std::size_t> pool,
                          std::size_t r_m, SimilarityKind kind) {
  MergePlan plan;
  if (r_m == 0) return plan;
  IndexSet rows(pool.begin(), pool.end());
  std::sort(rows.begin(), rows.end());
  if (std::adjacent_find(rows.begin(), rows.end()) != rows.end()) {
    throw ValidationError("merge pool contains duplicate rows");
  }
  for (auto r : rows) require_patch_row(pop, r, "merge pool");
  if (r_m > merge_capacity(rows.size())) {
    throw ValidationError("merge pool of " + std::to_string(rows.size()) +
                          " tokens cannot supply " + std::to_string(r_m) + " merges");
  }

  IndexSet side_a, side_b;
  for (std::size_t i = 0; i < rows.size(); ++i) (i % 2 == 0 ? side_a : side_b).push_back(rows[i]);

  auto gather = [&](const IndexSet& side) {
    FeatureMatrix m(static_cast<Eigen::Index>(side.size()), pop.features().cols());
    for (std::size_t i = 0; i < side.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) = pop.features().row(static_cast<Eigen::Index>(side[i]));
      if (kind == SimilarityKind::kCosine) {
        const double norm = m.row(static_cast<Eigen::Index>(i)).norm();
        if (norm == 0.0) {
          throw DegenerateInputError("cosine matching of a zero-norm token (row " +
                                     std::to_string(side[i]) + ")");
        }
        m.row(static_cast<Eigen::Index>(i)) /= norm;
      }
    }
    return m;
  };
  const Eigen::MatrixXd sim = gather(side_a) * gather(side_b).transpose();

  struct Link {
    std::size_t src;
    std::size_t dst;
    double score;
  };
  std::vector<Link> links;
  links.reserve(side_a.size());
  for (std::size_t i = 0; i < side_a.size(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < sim.cols(); ++j) {
      if (sim(static_cast<Eigen::Index>(i), j) > sim(static_cast<Eigen::Index>(i), best)) best = j;
    }
    links.push_back({side_a[i], side_b[static_cast<std::size_t>(best)],
                     sim(static_cast<Eigen::Index>(i), best)});
  }
  std::stable_sort(links.begin(), links.end(),
                   [](const Link& a, const Link& b) { return a.score > b.score; });
  for (std::size_t k = 0; k < r_m; ++k) plan.pairs.emplace_back(links[k].src, links[k].dst);
  return plan;
}

TokenPopulation apply_merge(const TokenPopulation& pop, const MergePlan& plan) {
  return reduce_rows(pop, {}, plan);
}

TokenPopulation apply_evict(const TokenPopulation& pop, std::span<const std::size_t> victims) {
  return reduce_rows(pop, victims, MergePlan{});
}

TokenPopulation tome_layer(const TokenPopulation& pop, std::size_t r, SimilarityKind kind) {
  if (r == 0) return pop;
  if (r >= pop.patch_count()) throw ValidationError("budget r must be below the patch count");
  if (r > merge_capacity(pop.patch_count())) {
    throw CapacityError("bipartite merging of " + std::to_string(pop.patch_count()) +
                        " tokens cannot remove " + std::to_string(r));
  }
  const auto rows = pop.patch_rows();
  return apply_merge(pop, bipartite_match(pop, rows, r, kind));
}

TokenPopulation topk_evict_layer(const TokenPopulation& pop, const ImportanceScores& scores,
                                 std::size_t r) {
  require_aligned(pop, scores);
  if (r == 0) return pop;
  if (r >= pop.patch_count()) throw ValidationError("budget r must be below the patch count");
  auto order = by_score(scores, pop.patch_rows());
  order.resize(r);
  return apply_evict(pop, order);
}

TokenPopulation topk_merge_layer(const TokenPopulation& pop, const ImportanceScores& scores,
                                 std::size_t r, SimilarityKind kind) {
  require_aligned(pop, scores);
  if (r == 0) return pop;
  if (r >= pop.patch_count()) throw ValidationError("budget r must be below the patch count");
  auto pool = by_score(scores, pop.patch_rows());
  pool.resize(std::min(pool.size(), 2 * r));
  if (r > merge_capacity(pool.size())) {
    throw CapacityError("lowest-scoring pool of " + std::to_string(pool.size()) +
                        " tokens cannot supply " + std::to_string(r) + " merges");
  }
  return apply_merge(pop, bipartite_match(pop, pool, r, kind));
}

CatisLayerResult catis_layer(const LayerScoringContext& ctx, const ScoringParams& sp,
                             const TriageParams& tp, std::size_t r) {
  const TokenPopulation& pop = ctx.population;
  if (r >= pop.patch_count()) throw ValidationError("budget r must be below the patch count");

  auto scores = catis_score(ctx, sp);
  const Partition part = partition(scores, tp.tau);
  const ChannelBudget budget = allocate(part, r, tp.evict_ratio);

  TriagePartition tri{part.protect, part.merge_pool, part.evict_pool, budget.r_e, budget.r_m, 0};

  IndexSet evicted = by_score(scores, part.evict_pool);
  evicted.resize(budget.r_e);

  // Merge-pool overflow: move the lowest-scoring members of M to eviction
  // until the remainder can supply the remaining merges.
  const IndexSet pool_by_score = by_score(scores, part.merge_pool);
  std::size_t overflow = 0;
  while (budget.r_m - overflow > merge_capacity(pool_by_score.size() - overflow)) {
    ++overflow;
    if (overflow > budget.r_m || overflow > pool_by_score.size()) {
      throw CapacityError("merge pool of " + std::to_string(part.merge_pool.size()) +
                          " tokens cannot absorb a merge budget of " + std::to_string(budget.r_m));
    }
  }
  evicted.insert(evicted.end(), pool_by_score.begin(), pool_by_score.begin() + overflow);
  IndexSet merge_rows(pool_by_score.begin() + overflow, pool_by_score.end());
  tri.r_m = budget.r_m - overflow;
  tri.m_overflow = overflow;

  MergePlan plan = bipartite_match(pop, merge_rows, tri.r_m, tp.kind);
  std::sort(evicted.begin(), evicted.end());
  TokenPopulation out = reduce_rows(pop, evicted, plan);
  return {std::move(out), std::move(tri), std::move(scores), std::move(plan), std::move(evicted)};
}

}  // namespace catis
