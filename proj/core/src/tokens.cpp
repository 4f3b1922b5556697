#include "catis/tokens.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "catis/error.hpp"

namespace catis {

void require_finite(const FeatureMatrix& m, const char* what) {
  if (!m.allFinite()) throw ValidationError(std::string(what) + ": non-finite value");
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + ": non-finite value");
  }
}

TokenPopulation::TokenPopulation(FeatureMatrix features, std::vector<std::uint32_t> sizes,
                                 std::vector<IndexSet> provenance, bool has_cls)
    : features_(std::move(features)),
      sizes_(std::move(sizes)),
      provenance_(std::move(provenance)),
      has_cls_(has_cls) {
  const std::size_t n = rows();
  if (n < first_patch() + 1) throw ValidationError("population needs at least one patch token");
  if (dim() < 1) throw ValidationError("population needs d >= 1");
  if (sizes_.size() != n || provenance_.size() != n) {
    throw ValidationError("sizes/provenance length does not match token count");
  }
  require_finite(features_, "token features");

  if (has_cls_ && (sizes_[0] != 1 || !provenance_[0].empty())) {
    throw ValidationError("CLS row must have size 1 and empty provenance");
  }
  std::vector<std::size_t> all;
  for (std::size_t i = first_patch(); i < n; ++i) {
    const auto& p = provenance_[i];
    if (sizes_[i] == 0) throw ValidationError("token size must be positive");
    if (p.size() != sizes_[i]) throw ValidationError("size does not match provenance cardinality");
    if (!std::is_sorted(p.begin(), p.end())) throw ValidationError("provenance must be sorted");
    all.insert(all.end(), p.begin(), p.end());
    represented_ += sizes_[i];
  }
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
    throw ValidationError("provenance sets overlap");
  }
}

TokenPopulation TokenPopulation::from_features(FeatureMatrix features, bool has_cls) {
  std::vector<std::uint32_t> sizes(static_cast<std::size_t>(features.rows()), 1);
  return from_sizes(std::move(features), std::move(sizes), has_cls);
}

TokenPopulation TokenPopulation::from_sizes(FeatureMatrix features,
                                            std::vector<std::uint32_t> sizes, bool has_cls) {
  std::vector<IndexSet> prov(sizes.size());
  std::size_t next = 0;
  for (std::size_t i = (has_cls ? 1 : 0); i < sizes.size(); ++i) {
    prov[i].resize(sizes[i]);
    std::iota(prov[i].begin(), prov[i].end(), next);
    next += sizes[i];
  }
  return TokenPopulation(std::move(features), std::move(sizes), std::move(prov), has_cls);
}

FeatureMatrix TokenPopulation::patch_features() const {
  return features_.bottomRows(static_cast<Eigen::Index>(patch_count()));
}

IndexSet TokenPopulation::patch_rows() const {
  IndexSet out(patch_count());
  std::iota(out.begin(), out.end(), first_patch());
  return out;
}

TokenPopulation TokenPopulation::without_cls() const {
  if (!has_cls_) return *this;
  return TokenPopulation(patch_features(), {sizes_.begin() + 1, sizes_.end()},
                         {provenance_.begin() + 1, provenance_.end()}, false);
}

bool operator==(const TokenPopulation& a, const TokenPopulation& b) {
  return a.has_cls_ == b.has_cls_ && a.features_.rows() == b.features_.rows() &&
         a.features_.cols() == b.features_.cols() && a.features_ == b.features_ &&
         a.sizes_ == b.sizes_ && a.provenance_ == b.provenance_;
}

void validate_attention(std::span<const double> attention, std::size_t patch_count, double tol) {
  if (attention.size() != patch_count) {
    throw ValidationError("CLS attention length " + std::to_string(attention.size()) +
                          " does not match patch count " + std::to_string(patch_count));
  }
  require_finite(attention, "CLS attention");
  double sum = 0.0;
  for (double a : attention) {
    if (a < 0.0 || a > 1.0) throw ValidationError("CLS attention entry outside [0,1]");
    sum += a;
  }
  if (std::abs(sum - 1.0) > tol) {
    throw ValidationError("CLS attention sums to " + std::to_string(sum) + ", expected 1");
  }
}

LayerTrace::LayerTrace(std::uint32_t model_depth, std::vector<TraceLayer> layers)
    : depth_(model_depth), layers_(std::move(layers)) {
  if (depth_ < 1) throw ValidationError("model depth must be positive");
  if (layers_.empty()) throw ValidationError("trace has no layers");
  if (layers_.size() > depth_) throw ValidationError("trace has more layers than model depth");
  for (const auto& layer : layers_) {
    if (layer.cls_attention) {
      validate_attention(*layer.cls_attention, layer.population.patch_count());
    }
  }
}

}  // namespace catis
