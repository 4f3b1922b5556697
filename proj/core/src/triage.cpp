#include "catis/triage.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "catis/error.hpp"

namespace catis {

Partition partition(const ImportanceScores& scores, double tau) {
  if (!scores.standardized) throw ContractError("partition expects standardized scores");
  if (!(tau >= 0.0)) throw ValidationError("tau must be >= 0");
  require_finite(scores.values, "triage scores");
  Partition p;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const double s = scores.values[k];
    const std::size_t row = scores.row_of(k);
    if (s > tau) {
      p.protect.push_back(row);
    } else if (s < -tau) {
      p.evict_pool.push_back(row);
    } else {
      p.merge_pool.push_back(row);
    }
  }
  return p;
}

ChannelBudget allocate(const Partition& part, std::size_t r, double evict_ratio) {
  if (!(evict_ratio >= 0.0 && evict_ratio <= 1.0)) {
    throw ValidationError("evict_ratio must be in [0,1]");
  }
  const std::size_t patches = part.protect.size() + part.merge_pool.size() + part.evict_pool.size();
  if (r >= patches) {
    throw ValidationError("budget r = " + std::to_string(r) + " must be below patch count " +
                          std::to_string(patches));
  }
  // the epsilon keeps products like 0.29 * 100 from flooring to 28
  const auto wanted =
      static_cast<std::size_t>(std::floor(evict_ratio * static_cast<double>(r) + 1e-9));
  ChannelBudget b;
  b.r_e = std::min(wanted, part.evict_pool.size());
  b.r_m = r - b.r_e;
  return b;
}

}  // namespace catis
