#include "catis/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "catis/error.hpp"

namespace catis {

void ScoringParams::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("gamma must be >= 0");
  if (!(w_cls >= 0.0 && w_cls <= 1.0)) throw ValidationError("w_cls must be in [0,1]");
  if (l_start < 1) throw ValidationError("l_start must be positive");
  if (!(sigma_floor > 0.0)) throw ValidationError("sigma_floor must be > 0");
}

void LayerScoringContext::validate() const {
  if (cls_attn) validate_attention(*cls_attn, population.patch_count());
  if (prev_cls_attn) validate_attention(*prev_cls_attn, population.patch_count());
}

ImportanceScores norm_f(const TokenPopulation& pop, double sigma_floor) {
  const std::size_t n = pop.patch_count();
  if (n < 2) throw DegenerateInputError("norm_f needs >= 2 patch tokens");
  if (!(sigma_floor > 0.0)) throw ValidationError("sigma_floor must be > 0");

  FeatureMatrix x = pop.patch_features();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::RowVectorXd inv_std(x.cols());
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const double sd = std::sqrt(x.col(k).squaredNorm() / static_cast<double>(n));
    inv_std(k) = 1.0 / std::max(sd, sigma_floor);
  }
  ImportanceScores out;
  out.first_row = pop.first_patch();
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = x.row(static_cast<Eigen::Index>(i)).cwiseProduct(inv_std).norm();
  }
  return out;
}

std::vector<double> momentum_cls(std::span<const double> a_l, std::span<const double> a_prev,
                                 double gamma) {
  if (a_l.size() != a_prev.size()) throw ValidationError("momentum_cls: length mismatch");
  require_finite(a_l, "momentum_cls input");
  require_finite(a_prev, "momentum_cls input");
  std::vector<double> out(a_l.size());
  for (std::size_t i = 0; i < a_l.size(); ++i) {
    out[i] = a_l[i] + gamma * (a_l[i] - a_prev[i]);
  }
  return out;
}

ImportanceScores zscore(const ImportanceScores& scores) {
  const std::size_t n = scores.size();
  if (n < 2) throw DegenerateInputError("zscore needs >= 2 scores");
  require_finite(scores.values, "zscore input");
  const double mean = std::accumulate(scores.values.begin(), scores.values.end(), 0.0) /
                      static_cast<double>(n);
  double ss = 0.0;
  for (double v : scores.values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));

  ImportanceScores out;
  out.first_row = scores.first_row;
  out.standardized = true;
  out.values.assign(n, 0.0);
  // spread below rounding noise of the mean counts as constant
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out.values[i] = (scores.values[i] - mean) / sd;
  return out;
}

ImportanceScores fuse(const ImportanceScores& cls_hat, const ImportanceScores& nf_hat, double w_cls) {
  if (!cls_hat.standardized || !nf_hat.standardized) {
    throw ContractError("fuse expects standardized scores");
  }
  if (cls_hat.size() != nf_hat.size() || cls_hat.first_row != nf_hat.first_row) {
    throw ValidationError("fuse: score vectors are not aligned");
  }
  if (!(w_cls >= 0.0 && w_cls <= 1.0)) throw ValidationError("w_cls must be in [0,1]");
  ImportanceScores out;
  out.first_row = nf_hat.first_row;
  out.standardized = true;
  out.degenerate = cls_hat.degenerate && nf_hat.degenerate;
  out.values.resize(nf_hat.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = w_cls * cls_hat.values[i] + (1.0 - w_cls) * nf_hat.values[i];
  }
  return out;
}

ImportanceScores catis_score(const LayerScoringContext& ctx, const ScoringParams& params) {
  params.validate();
  ctx.validate();
  auto nf_hat = zscore(norm_f(ctx.population, params.sigma_floor));
  if (ctx.layer < params.l_start || !ctx.cls_attn) return nf_hat;

  // Without history the momentum term is zero: a_prev = a_l.
  const auto& a_l = *ctx.cls_attn;
  const auto& a_prev = ctx.prev_cls_attn ? *ctx.prev_cls_attn : a_l;
  ImportanceScores cls;
  cls.first_row = ctx.population.first_patch();
  cls.values = momentum_cls(a_l, a_prev, params.gamma);
  return fuse(zscore(cls), nf_hat, params.w_cls);
}

std::vector<IndexSet> trace_origins(const TokenPopulation& before, const TokenPopulation& after) {
  std::unordered_map<std::size_t, std::size_t> owner;  // original patch -> row in `before`
  for (std::size_t r = before.first_patch(); r < before.rows(); ++r) {
    for (auto p : before.provenance()[r]) owner.emplace(p, r);
  }
  std::vector<IndexSet> origins(after.patch_count());
  for (std::size_t k = 0; k < after.patch_count(); ++k) {
    auto& set = origins[k];
    for (auto p : after.provenance()[after.first_patch() + k]) {
      const auto it = owner.find(p);
      if (it == owner.end()) {
        throw ValidationError("trace_origins: patch " + std::to_string(p) +
                              " is not present in the earlier population");
      }
      set.push_back(it->second);
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
  }
  return origins;
}

std::vector<double> inherit_attention(std::span<const double> prev_attention,
                                      const TokenPopulation& before, const TokenPopulation& after) {
  if (prev_attention.size() != before.patch_count()) {
    throw ValidationError("inherit_attention: attention does not match the earlier population");
  }
  const auto origins = trace_origins(before, after);
  std::vector<double> out(origins.size(), 0.0);
  for (std::size_t k = 0; k < origins.size(); ++k) {
    double mass = 0.0, weight = 0.0;
    for (auto row : origins[k]) {
      const double w = before.sizes()[row];
      mass += w * prev_attention[row - before.first_patch()];
      weight += w;
    }
    out[k] = mass / weight;
  }
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (total > 0.0) {
    for (auto& v : out) v /= total;
  } else {
    out.assign(out.size(), 1.0 / static_cast<double>(out.size()));
  }
  return out;
}

}  // namespace catis
