#include "catis/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catis/error.hpp"
#include "catis/random.hpp"
#include "catis/scoring.hpp"
#include "parallel.hpp"

namespace catis {
namespace {

FeatureMatrix select_rows(const FeatureMatrix& f, std::span<const std::size_t> rows) {
  FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), f.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = f.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Eigen::MatrixXd similarity_of(const FeatureMatrix& x, SimilarityKind kind) {
  FeatureMatrix work = x;
  if (kind == SimilarityKind::kCosine) {
    for (Eigen::Index i = 0; i < work.rows(); ++i) {
      const double norm = work.row(i).norm();
      if (norm == 0.0) {
        throw DegenerateInputError("cosine similarity of a zero-norm token (row " +
                                   std::to_string(i) + ")");
      }
      work.row(i) /= norm;
    }
  }
  Eigen::MatrixXd s = work * work.transpose();
  // Mirror the upper triangle so the matrix is exactly symmetric.
  s.triangularView<Eigen::StrictlyLower>() = s.transpose();
  return s;
}

double upper_sq_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double acc = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double diff = a(i, j) - b(i, j);
      acc += diff * diff;
    }
  }
  return acc;
}

void require_same_shape(const SimilarityMatrix& a, const SimilarityMatrix& b) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) {
    throw ValidationError("similarity matrices differ in shape");
  }
}

}  // namespace

const char* to_string(SimilarityKind kind) noexcept {
  return kind == SimilarityKind::kCosine ? "cosine" : "dot";
}

SimilarityKind parse_similarity_kind(const std::string& name) {
  if (name == "cosine") return SimilarityKind::kCosine;
  if (name == "dot") return SimilarityKind::kDot;
  throw ValidationError("unknown similarity kind: " + name);
}

const char* to_string(EnergySignal signal) noexcept {
  switch (signal) {
    case EnergySignal::kPairwiseCosine: return "pairwise-cosine";
    case EnergySignal::kPairwiseDot: return "pairwise-dot";
    case EnergySignal::kUnaryNormF: return "unary-normF";
  }
  return "unknown";
}

SimilarityMatrix pairwise_similarity(const TokenPopulation& pop, SimilarityKind kind) {
  if (pop.patch_count() < 2) throw DegenerateInputError("similarity needs >= 2 patch tokens");
  return {similarity_of(pop.patch_features(), kind), kind};
}

SimilarityMatrix pairwise_similarity(const TokenPopulation& pop, std::span<const std::size_t> rows,
                                     SimilarityKind kind) {
  if (rows.size() < 2) throw DegenerateInputError("similarity needs >= 2 tokens");
  for (auto r : rows) {
    if (r < pop.first_patch() || r >= pop.rows()) {
      throw ValidationError("row " + std::to_string(r) + " is not a patch token");
    }
  }
  return {similarity_of(select_rows(pop.features(), rows), kind), kind};
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 share the mean of ranks i+1..j
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("spearman_rho: length mismatch");
  if (a.size() < 2) throw DegenerateInputError("spearman_rho needs >= 2 observations");
  require_finite(a, "spearman_rho input");
  require_finite(b, "spearman_rho input");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(ra.size());
  const double mean = (n + 1.0) / 2.0;  // average ranks always sum to n(n+1)/2
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw UndefinedStatisticError("spearman_rho: constant ranking");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> upper_triangle(const SimilarityMatrix& s) {
  const Eigen::Index n = s.values.rows();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) out.push_back(s.values(i, j));
  }
  return out;
}

double ranking_consistency(const SimilarityMatrix& clean, const SimilarityMatrix& corrupted) {
  require_same_shape(clean, corrupted);
  if (clean.kind != corrupted.kind) throw ValidationError("similarity kinds differ");
  return spearman_rho(upper_triangle(clean), upper_triangle(corrupted));
}

double frobenius_distance(const SimilarityMatrix& clean, const SimilarityMatrix& corrupted) {
  require_same_shape(clean, corrupted);
  return (clean.values - corrupted.values).norm();
}

double rho_off(const TokenPopulation& pop) {
  const std::size_t n = pop.patch_count();
  const std::size_t d = pop.dim();
  if (n < 3) throw DegenerateInputError("rho_off needs >= 3 patch tokens");
  if (d < 2) throw DegenerateInputError("rho_off needs d >= 2");

  FeatureMatrix x = pop.patch_features();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::VectorXd stddev(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    stddev(k) = std::sqrt(x.col(k).squaredNorm() / static_cast<double>(n));
    const double scale = std::max(1.0, std::abs(mean(k)));
    if (!(stddev(k) > 1e-12 * scale)) {
      throw UndefinedStatisticError("rho_off: dimension " + std::to_string(k) +
                                    " has zero variance");
    }
  }
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < cov.rows(); ++j) {
    for (Eigen::Index k = j + 1; k < cov.cols(); ++k) {
      const double r = cov(j, k) / (stddev(j) * stddev(k));
      acc += std::min(1.0, std::abs(r));
    }
  }
  // each unordered pair appears twice in the j != k sum
  return 2.0 * acc / static_cast<double>(d * (d - 1));
}

double pool_rho_s(const TokenPopulation& clean, const TokenPopulation& corrupted,
                  std::span<const std::size_t> pool, SimilarityKind kind) {
  if (pool.size() < 3) throw DegenerateInputError("pool_rho_s needs |pool| >= 3");
  if (clean.rows() != corrupted.rows() || clean.has_cls() != corrupted.has_cls()) {
    throw ValidationError("pool_rho_s: populations differ in shape");
  }
  return ranking_consistency(pairwise_similarity(clean, pool, kind),
                             pairwise_similarity(corrupted, pool, kind));
}

double perturbation_energy(const TokenPopulation& pop, EnergySignal signal, double sigma,
                           std::size_t n_mc, std::uint64_t seed, double sigma_floor) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be > 0");
  if (n_mc < 1) throw ValidationError("n_mc must be >= 1");

  const FeatureMatrix base = pop.patch_features();
  const std::size_t n = pop.patch_count();
  const bool pairwise = signal != EnergySignal::kUnaryNormF;
  const auto kind =
      signal == EnergySignal::kPairwiseDot ? SimilarityKind::kDot : SimilarityKind::kCosine;
  if (pairwise && n < 2) throw DegenerateInputError("pairwise energy needs >= 2 patch tokens");

  Eigen::MatrixXd base_sim;
  std::vector<double> base_unary;
  if (pairwise) {
    base_sim = similarity_of(base, kind);
  } else {
    base_unary = norm_f(pop.without_cls(), sigma_floor).values;
  }

  std::vector<double> per_iter(n_mc, 0.0);
  detail::parallel_for(n_mc, [&](std::size_t it) {
    FeatureMatrix noisy = base;
    for (std::size_t i = 0; i < n; ++i) {
      GaussianStream g(seed, pop.first_patch() + i, it);
      for (Eigen::Index k = 0; k < noisy.cols(); ++k) {
        noisy(static_cast<Eigen::Index>(i), k) += sigma * g();
      }
    }
    if (pairwise) {
      per_iter[it] = upper_sq_diff(similarity_of(noisy, kind), base_sim);
    } else {
      const auto s = norm_f(TokenPopulation::from_features(std::move(noisy)), sigma_floor);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double diff = s.values[i] - base_unary[i];
        acc += diff * diff;
      }
      per_iter[it] = acc;
    }
  });
  const double total = std::accumulate(per_iter.begin(), per_iter.end(), 0.0);
  return total / static_cast<double>(n_mc);
}

EnergySweep energy_gap_sweep(std::span<const std::size_t> np_list, std::size_t d, double sigma,
                             std::size_t n_mc, std::uint64_t seed) {
  if (np_list.size() < 3) throw ValidationError("energy sweep needs >= 3 N_p values");
  if (d < 2) throw ValidationError("energy sweep needs d >= 2");
  for (auto np : np_list) {
    if (np < 4) throw ValidationError("energy sweep needs every N_p >= 4");
  }

  EnergySweep sweep;
  std::vector<double> lx, ly;
  for (auto np : np_list) {
    FeatureMatrix x(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < np; ++i) {
      // population draws live in a separate key space from the perturbations
      GaussianStream g(seed ^ 0x5bd1e9955bd1e995ULL, np, i);
      for (std::size_t k = 0; k < d; ++k) {
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = g();
      }
    }
    const auto pop = TokenPopulation::from_features(std::move(x));
    const std::uint64_t pseed = seed + 0x9e3779b97f4a7c15ULL * np;
    EnergyPoint pt;
    pt.np = np;
    pt.v_pair = perturbation_energy(pop, EnergySignal::kPairwiseCosine, sigma, n_mc, pseed);
    pt.v_unary = perturbation_energy(pop, EnergySignal::kUnaryNormF, sigma, n_mc, pseed);
    if (pt.v_pair <= kEnergyFloor || pt.v_unary <= kEnergyFloor) sweep.degenerate = true;
    sweep.points.push_back(pt);
  }
  if (!sweep.degenerate) {
    for (const auto& pt : sweep.points) {
      lx.push_back(std::log(static_cast<double>(pt.np)));
      ly.push_back(std::log(pt.v_pair / pt.v_unary));
    }
    sweep.fit = fit_line(lx, ly);
  }
  return sweep;
}

void validate_report(const DiagnosticsReport& report) {
  auto in = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
  for (const auto& row : report.per_layer) {
    const std::string ctx = "layer " + std::to_string(row.layer) + ": ";
    if (!in(row.rho_s, -1.0, 1.0)) throw ValidationError(ctx + "rho_s out of [-1,1]");
    if (!(std::isfinite(row.delta_f) && row.delta_f >= 0.0)) {
      throw ValidationError(ctx + "delta_f negative");
    }
    if (!in(row.rho_off, 0.0, 1.0)) throw ValidationError(ctx + "rho_off out of [0,1]");
    if (row.pool_rho_s && !in(*row.pool_rho_s, -1.0, 1.0)) {
      throw ValidationError(ctx + "pool_rho_s out of [-1,1]");
    }
  }
  if (report.energy && (report.energy->v_pair < 0.0 || report.energy->v_unary < 0.0)) {
    throw ValidationError("energy must be non-negative");
  }
}

}  // namespace catis
