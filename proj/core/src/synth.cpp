#include "catis/synth.hpp"

#include <cmath>
#include <string>

#include "catis/error.hpp"
#include "catis/random.hpp"

namespace catis {
namespace {

// Key-space tags so different draws never share a stream.
enum StreamTag : std::uint64_t {
  kTagCenters = 1,
  kTagTokens = 2,
  kTagCorrupt = 3,
  kTagWeights = 4,
  kTagCls = 5,
};

Eigen::MatrixXd gaussian_matrix(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                Eigen::Index rows, Eigen::Index cols, double scale) {
  GaussianStream g(seed, a, b);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * g();
  }
  return m;
}

FeatureMatrix layer_norm(const FeatureMatrix& x) {
  FeatureMatrix out = x;
  const double d = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mean = out.row(i).sum() / d;
    out.row(i).array() -= mean;
    const double var = out.row(i).squaredNorm() / d;
    out.row(i) /= std::sqrt(var + 1e-6);
  }
  return out;
}

void softmax_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp().matrix();
    m.row(i) /= m.row(i).sum();
  }
}

struct BlockWeights {
  Eigen::MatrixXd wq, wk, wv, wo, w1, w2;
};

BlockWeights block_weights(std::uint64_t seed, std::size_t layer, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  auto key = [&](std::uint64_t which) { return (static_cast<std::uint64_t>(layer) << 8) | which; };
  return {gaussian_matrix(seed, kTagWeights, key(0), n, n, s),
          gaussian_matrix(seed, kTagWeights, key(1), n, n, s),
          gaussian_matrix(seed, kTagWeights, key(2), n, n, s),
          gaussian_matrix(seed, kTagWeights, key(3), n, n, 0.5 * s),
          gaussian_matrix(seed, kTagWeights, key(4), n, 2 * n, s),
          gaussian_matrix(seed, kTagWeights, key(5), 2 * n, n, 0.5 / std::sqrt(2.0 * d))};
}

TokenPopulation with_features(const TokenPopulation& like, FeatureMatrix features) {
  return TokenPopulation(std::move(features), {like.sizes().begin(), like.sizes().end()},
                         like.provenance(), like.has_cls());
}

}  // namespace

void ClusterSpec::validate() const {
  if (n_clusters < 1 || tokens_per_cluster < 1) throw ValidationError("cluster counts must be >= 1");
  if (d < 2) throw ValidationError("cluster spec needs d >= 2");
  if (!(center_scale > 0.0) || !(within_std > 0.0)) {
    throw ValidationError("center_scale and within_std must be > 0");
  }
}

TokenPopulation gen_clusters(const ClusterSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.d);
  FeatureMatrix x(static_cast<Eigen::Index>(spec.n_clusters * spec.tokens_per_cluster), d);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    const Eigen::RowVectorXd center =
        gaussian_matrix(spec.seed, kTagCenters, c, 1, d, spec.center_scale);
    for (std::size_t t = 0; t < spec.tokens_per_cluster; ++t, ++row) {
      x.row(row) = center + gaussian_matrix(spec.seed, kTagTokens, static_cast<std::uint64_t>(row),
                                            1, d, spec.within_std);
    }
  }
  return TokenPopulation::from_features(std::move(x));
}

TokenPopulation corrupt(const TokenPopulation& pop, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be >= 0");
  if (sigma == 0.0) return pop;
  FeatureMatrix x = pop.features();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    GaussianStream g(seed, kTagCorrupt, static_cast<std::uint64_t>(i));
    for (Eigen::Index k = 0; k < x.cols(); ++k) x(i, k) += sigma * g();
  }
  return with_features(pop, std::move(x));
}

const char* to_string(ReducerKind kind) noexcept {
  switch (kind) {
    case ReducerKind::kNone: return "none";
    case ReducerKind::kTome: return "tome";
    case ReducerKind::kCatis: return "catis";
    case ReducerKind::kTopkEvict: return "topk-evict";
    case ReducerKind::kTopkMerge: return "topk-merge";
  }
  return "unknown";
}

ReducerKind parse_reducer_kind(const std::string& name) {
  for (auto k : {ReducerKind::kNone, ReducerKind::kTome, ReducerKind::kCatis,
                 ReducerKind::kTopkEvict, ReducerKind::kTopkMerge}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown reducer: " + name);
}

void ToyModelSpec::validate() const {
  if (L < 1) throw ValidationError("toy model needs L >= 1");
  if (d < 2) throw ValidationError("toy model needs d >= 2");
  if (n_heads < 1 || d % n_heads != 0) throw ValidationError("n_heads must divide d");
  params.scoring.validate();
  if (!(params.triage.tau >= 0.0)) throw ValidationError("tau must be >= 0");
  if (!(params.triage.evict_ratio >= 0.0 && params.triage.evict_ratio <= 1.0)) {
    throw ValidationError("evict_ratio must be in [0,1]");
  }
}

ReducerStep apply_reducer(ReducerKind kind, const LayerScoringContext& ctx,
                          const ReducerParams& params, std::size_t r) {
  const TokenPopulation& pop = ctx.population;
  ReductionAudit audit;
  audit.layer = ctx.layer;
  audit.tokens_in = pop.patch_count();
  auto finish = [&](TokenPopulation out) {
    audit.tokens_out = out.patch_count();
    return ReducerStep{std::move(out), std::move(audit)};
  };
  switch (kind) {
    case ReducerKind::kNone:
      return finish(pop);
    case ReducerKind::kTome:
      audit.r_m = r;
      return finish(tome_layer(pop, r, params.triage.kind));
    case ReducerKind::kTopkEvict:
      audit.r_e = r;
      return finish(topk_evict_layer(pop, catis_score(ctx, params.scoring), r));
    case ReducerKind::kTopkMerge:
      audit.r_m = r;
      return finish(
          topk_merge_layer(pop, catis_score(ctx, params.scoring), r, params.triage.kind));
    case ReducerKind::kCatis: {
      auto res = catis_layer(ctx, params.scoring, params.triage, r);
      audit.r_e = res.partition.r_e;
      audit.r_m = res.partition.r_m;
      audit.m_overflow = res.partition.m_overflow;
      audit.partition = std::move(res.partition);
      audit.plan = std::move(res.plan);
      return finish(std::move(res.population));
    }
  }
  throw ValidationError("unknown reducer");
}

ToyRun toy_forward(const ToyModelSpec& spec, const TokenPopulation& input) {
  spec.validate();
  if (input.has_cls()) throw ValidationError("toy_forward input must not carry a CLS row");
  if (input.dim() != spec.d) throw ValidationError("input feature width does not match spec.d");
  if (spec.reducer != ReducerKind::kNone && input.patch_count() <= spec.L * spec.r) {
    throw CapacityError("input of " + std::to_string(input.patch_count()) +
                        " tokens cannot absorb " + std::to_string(spec.L) + " layers of r = " +
                        std::to_string(spec.r));
  }

  const auto d = static_cast<Eigen::Index>(spec.d);
  const auto heads = static_cast<Eigen::Index>(spec.n_heads);
  const Eigen::Index dh = d / heads;

  // Prepend a CLS token.
  FeatureMatrix x0(static_cast<Eigen::Index>(input.rows()) + 1, d);
  x0.row(0) = gaussian_matrix(spec.seed, kTagCls, 0, 1, d, 1.0);
  x0.bottomRows(static_cast<Eigen::Index>(input.rows())) = input.features();
  std::vector<std::uint32_t> sizes{1};
  sizes.insert(sizes.end(), input.sizes().begin(), input.sizes().end());
  std::vector<IndexSet> prov{IndexSet{}};
  prov.insert(prov.end(), input.provenance().begin(), input.provenance().end());
  TokenPopulation state(std::move(x0), std::move(sizes), std::move(prov), true);

  std::vector<TraceLayer> layers;
  std::vector<ReductionAudit> audit;
  std::optional<TokenPopulation> prev_pop;  // patch-only population of the previous block
  std::vector<double> prev_attn;

  for (std::size_t l = 0; l < spec.L; ++l) {
    const BlockWeights w = block_weights(spec.seed, l, spec.d);
    const FeatureMatrix z = layer_norm(state.features());
    const Eigen::MatrixXd q = z * w.wq, k = z * w.wk, v = z * w.wv;
    Eigen::MatrixXd heads_out(z.rows(), d);
    Eigen::VectorXd cls_row = Eigen::VectorXd::Zero(z.rows());
    for (Eigen::Index h = 0; h < heads; ++h) {
      Eigen::MatrixXd a = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() /
                          std::sqrt(static_cast<double>(dh));
      softmax_rows(a);
      heads_out.middleCols(h * dh, dh) = a * v.middleCols(h * dh, dh);
      cls_row += a.row(0).transpose();
    }
    // CLS-to-patch attention, head-averaged then renormalized over patches.
    std::vector<double> attn(state.patch_count());
    double mass = 0.0;
    for (std::size_t i = 0; i < attn.size(); ++i) {
      attn[i] = cls_row(static_cast<Eigen::Index>(i + 1));
      mass += attn[i];
    }
    for (auto& a : attn) a /= mass;

    const FeatureMatrix hidden = state.features() + heads_out * w.wo;
    const TokenPopulation pre = with_features(state, hidden);
    const TokenPopulation recorded = with_features(state, z).without_cls();
    layers.push_back({recorded, attn});

    std::optional<std::vector<double>> aligned_prev;
    if (prev_pop) aligned_prev = inherit_attention(prev_attn, *prev_pop, recorded);
    LayerScoringContext ctx{pre, attn, aligned_prev, l};
    ReducerStep step = [&] {
      try {
        return apply_reducer(spec.reducer, ctx, spec.params, spec.r);
      } catch (const CapacityError& e) {
        throw CapacityError("layer " + std::to_string(l) + ": " + e.what());
      }
    }();
    audit.push_back(std::move(step.audit));
    prev_pop = recorded;
    prev_attn = std::move(attn);

    const TokenPopulation& reduced = step.population;
    const FeatureMatrix mlp =
        (layer_norm(reduced.features()) * w.w1).array().tanh().matrix() * w.w2;
    state = with_features(reduced, reduced.features() + mlp);
  }
  return {LayerTrace(static_cast<std::uint32_t>(spec.L), std::move(layers)), std::move(audit),
          state.without_cls()};
}

}  // namespace catis
