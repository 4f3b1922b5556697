#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "catis/reduce.hpp"
#include "catis/scoring.hpp"
#include "catis/tokens.hpp"

namespace catis {

struct ClusterSpec {
  std::size_t n_clusters = 3;
  std::size_t tokens_per_cluster = 8;
  std::size_t d = 16;
  double center_scale = 10.0;
  double within_std = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Gaussian clusters: centers ~ N(0, center_scale^2 I), tokens = center +
/// N(0, within_std^2 I). Rows are grouped by cluster, cluster c occupying
/// rows [c * tokens_per_cluster, (c + 1) * tokens_per_cluster).
TokenPopulation gen_clusters(const ClusterSpec& spec);

/// Adds i.i.d. N(0, sigma^2) to every feature of every row (CLS included).
/// sigma = 0 returns an identical copy.
TokenPopulation corrupt(const TokenPopulation& pop, double sigma, std::uint64_t seed);

enum class ReducerKind { kNone, kTome, kCatis, kTopkEvict, kTopkMerge };

const char* to_string(ReducerKind kind) noexcept;
ReducerKind parse_reducer_kind(const std::string& name);

struct ReducerParams {
  ScoringParams scoring;
  TriageParams triage;
};

struct ToyModelSpec {
  std::size_t L = 8;
  std::size_t d = 16;
  std::size_t n_heads = 4;
  std::uint64_t seed = 0;
  ReducerKind reducer = ReducerKind::kNone;
  std::size_t r = 0;
  ReducerParams params;

  void validate() const;
};

/// Per-layer record of one layer operator application.
struct ReductionAudit {
  std::size_t layer = 0;
  std::size_t tokens_in = 0;
  std::size_t tokens_out = 0;
  std::size_t r_e = 0;
  std::size_t r_m = 0;
  std::size_t m_overflow = 0;
  std::optional<TriagePartition> partition;  // CATIS only
  MergePlan plan;
};

struct ToyRun {
  LayerTrace trace;
  std::vector<ReductionAudit> audit;
  TokenPopulation final_population;  // patch tokens after the last block
};

/// Applies one reducer to one population. `scores` feeds the top-k ablations;
/// CATIS builds its own from `ctx`.
struct ReducerStep {
  TokenPopulation population;
  ReductionAudit audit;
};
ReducerStep apply_reducer(ReducerKind kind, const LayerScoringContext& ctx,
                          const ReducerParams& params, std::size_t r);

/// Random fixed-weight transformer-like stack over `input` (patch tokens, no
/// CLS). Each block: LayerNorm, multi-head softmax attention with a prepended
/// CLS token, residual, reducer, then a residual tanh MLP. The trace records,
/// per block, the layer-normed patch features entering attention and the
/// head-averaged CLS-to-patch attention renormalized over patches.
ToyRun toy_forward(const ToyModelSpec& spec, const TokenPopulation& input);

}  // namespace catis
