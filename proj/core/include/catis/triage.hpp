#pragma once

#include <cstddef>

#include "catis/tokens.hpp"

namespace catis {

/// Level-set split of standardized scores. Sets hold population row indices.
struct Partition {
  IndexSet protect;     // s > tau
  IndexSet merge_pool;  // -tau <= s <= tau
  IndexSet evict_pool;  // s < -tau
};

struct ChannelBudget {
  std::size_t r_e = 0;
  std::size_t r_m = 0;
};

/// Partition plus the budgets actually used by a layer operator.
///
/// `m_overflow` counts merge-pool members that were evicted because the merge
/// pool could not supply r_m pairs; r_e + r_m + m_overflow equals the layer
/// budget. It is zero whenever the merge pool is large enough.
struct TriagePartition {
  IndexSet protect;
  IndexSet merge_pool;
  IndexSet evict_pool;
  std::size_t r_e = 0;
  std::size_t r_m = 0;
  std::size_t m_overflow = 0;
};

/// P = {s > tau}, E = {s < -tau}, M = the closed band between. Requires
/// standardized scores (degenerate all-zero scores land entirely in M).
Partition partition(const ImportanceScores& scores, double tau);

/// r_e = min(floor(evict_ratio * r), |E|), r_m = r - r_e. Throws when r is not
/// below the patch count covered by the partition.
ChannelBudget allocate(const Partition& part, std::size_t r, double evict_ratio);

}  // namespace catis
