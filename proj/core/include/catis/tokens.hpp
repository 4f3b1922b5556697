#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace catis {

/// Row-major dense matrix; one token per row.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Sorted list of indices. Used for original-patch provenance and for
/// row selections over a population.
using IndexSet = std::vector<std::size_t>;

/// A set of tokens at one layer: N_p x d features, per-token merge sizes, and
/// the original patches each token stands for.
///
/// When has_cls() is true, row 0 is the CLS token. It has size 1, empty
/// provenance, and is never a reduction candidate. Rows first_patch() onward
/// are patch tokens.
///
/// Immutable after construction; every constructor validates.
class TokenPopulation {
 public:
  /// Full constructor. `sizes` and `provenance` cover every row, including
  /// the CLS row when present. The recorded patch count is the sum of patch
  /// sizes.
  TokenPopulation(FeatureMatrix features, std::vector<std::uint32_t> sizes,
                  std::vector<IndexSet> provenance, bool has_cls);

  /// Fresh population: every patch token has size 1 and provenance {k}, where
  /// k counts patch rows from 0.
  static TokenPopulation from_features(FeatureMatrix features, bool has_cls = false);

  /// Sizes only; provenance is rebuilt as contiguous ranges in row order
  /// (singletons when every size is 1).
  static TokenPopulation from_sizes(FeatureMatrix features, std::vector<std::uint32_t> sizes,
                                    bool has_cls = false);

  const FeatureMatrix& features() const noexcept { return features_; }
  std::span<const std::uint32_t> sizes() const noexcept { return sizes_; }
  const std::vector<IndexSet>& provenance() const noexcept { return provenance_; }
  bool has_cls() const noexcept { return has_cls_; }

  std::size_t rows() const noexcept { return static_cast<std::size_t>(features_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  std::size_t first_patch() const noexcept { return has_cls_ ? 1 : 0; }
  std::size_t patch_count() const noexcept { return rows() - first_patch(); }
  /// Sum of patch-token sizes: the number of original patches represented.
  std::size_t represented_patches() const noexcept { return represented_; }

  /// Patch-token features only (CLS row dropped).
  FeatureMatrix patch_features() const;

  /// Row indices of all patch tokens, ascending.
  IndexSet patch_rows() const;

  /// Copy with CLS row removed; the result has has_cls() == false.
  TokenPopulation without_cls() const;

  friend bool operator==(const TokenPopulation& a, const TokenPopulation& b);

 private:
  FeatureMatrix features_;
  std::vector<std::uint32_t> sizes_;
  std::vector<IndexSet> provenance_;
  bool has_cls_;
  std::size_t represented_ = 0;
};

/// Scores over the patch tokens of a population. values[k] belongs to row
/// first_row + k.
struct ImportanceScores {
  std::vector<double> values;
  bool standardized = false;
  /// Set by zscore() when the input had zero spread; values are then all 0.
  bool degenerate = false;
  std::size_t first_row = 0;

  std::size_t size() const noexcept { return values.size(); }
  std::size_t row_of(std::size_t k) const noexcept { return first_row + k; }
};

/// One recorded layer: the token population entering the layer and,
/// optionally, the multi-head averaged CLS-to-patch attention.
struct TraceLayer {
  TokenPopulation population;
  std::optional<std::vector<double>> cls_attention;
};

/// Ordered per-layer record of a forward pass.
class LayerTrace {
 public:
  LayerTrace(std::uint32_t model_depth, std::vector<TraceLayer> layers);

  std::uint32_t model_depth() const noexcept { return depth_; }
  const std::vector<TraceLayer>& layers() const noexcept { return layers_; }
  std::size_t size() const noexcept { return layers_.size(); }
  const TraceLayer& operator[](std::size_t i) const { return layers_.at(i); }

 private:
  std::uint32_t depth_;
  std::vector<TraceLayer> layers_;
};

/// Checks a CLS-to-patch attention vector against a population: length equals
/// the patch count, entries in [0,1], finite, sum 1 within `tol`.
void validate_attention(std::span<const double> attention, std::size_t patch_count,
                        double tol = 1e-5);

/// Throws ValidationError if any entry is non-finite.
void require_finite(const FeatureMatrix& m, const char* what);
void require_finite(std::span<const double> v, const char* what);

}  // namespace catis
