#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "catis/error.hpp"
#include "catis/random.hpp"
#include "catis/recurrence.hpp"
#include "catis/reduce.hpp"
#include "catis/scoring.hpp"
#include "catis/serialize.hpp"
#include "catis/trace_io.hpp"
#include "catis/triage.hpp"

namespace catis::cli {

namespace {

// Runs `fn`, prefixing any library error with the layer index.
template <class Fn>
auto at_layer(std::size_t layer, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), "layer " + std::to_string(layer) + ": " + e.what());
  }
}

// Previous-layer attention is usable as-is only when the token set did not
// change; trace files do not carry provenance across layers.
std::optional<std::vector<double>> previous_attention(const LayerTrace& trace, std::size_t l) {
  if (l == 0) return std::nullopt;
  const auto& prev = trace[l - 1];
  if (!prev.cls_attention || prev.population.patch_count() != trace[l].population.patch_count()) {
    return std::nullopt;
  }
  return prev.cls_attention;
}

LayerTrace corrupt_trace(const LayerTrace& clean, double sigma, std::uint64_t seed) {
  std::vector<TraceLayer> layers;
  for (std::size_t l = 0; l < clean.size(); ++l) {
    const std::uint64_t layer_seed = KeyedStream(seed, l)();
    layers.push_back({corrupt(clean[l].population, sigma, layer_seed), clean[l].cls_attention});
  }
  return LayerTrace(clean.model_depth(), std::move(layers));
}

std::string audit_csv_body(const std::vector<ReductionAudit>& audit) {
  std::ostringstream out;
  out << "layer,tokens_in,tokens_out,r_e,r_m,m_overflow\n";
  for (const auto& a : audit) {
    out << a.layer << ',' << a.tokens_in << ',' << a.tokens_out << ',' << a.r_e << ',' << a.r_m
        << ',' << a.m_overflow << '\n';
  }
  return out.str();
}

// token_index,size,patches per layer, with a leading layer column.
std::string layered_merge_groups(const std::vector<std::pair<std::size_t, const TokenPopulation*>>& pops) {
  std::ostringstream out;
  out << "layer,token_index,size,patches\n";
  for (const auto& [layer, pop] : pops) {
    std::istringstream body(merge_groups_csv_body(*pop));
    std::string line;
    std::getline(body, line);  // header
    while (std::getline(body, line)) out << layer << ',' << line << '\n';
  }
  return out.str();
}

void add_trace(OutputSet& out, const std::string& name, LayerTrace trace) {
  out.add_file(name, [t = std::move(trace)](const std::filesystem::path& p) { save_trace(t, p); });
}

}  // namespace

OutputSet cmd_diagnose(const DiagnoseOptions& opt, Provenance prov) {
  const SimilarityKind kind = parse_similarity_kind(opt.kind);
  opt.params.scoring.validate();
  const LayerTrace clean = load_trace(opt.trace);
  LayerTrace corrupted = [&] {
    if (!opt.corrupted.empty()) return load_trace(opt.corrupted);
    if (!(opt.sigma >= 0.0) || !std::isfinite(opt.sigma)) throw ValidationError("sigma must be >= 0");
    return corrupt_trace(clean, opt.sigma, opt.seed);
  }();
  if (corrupted.size() != clean.size()) {
    throw ValidationError("clean and corrupted traces differ in layer count");
  }

  DiagnosticsReport report;
  report.kind = kind;
  for (std::size_t l = 0; l < clean.size(); ++l) {
    report.per_layer.push_back(at_layer(l, [&] {
      const auto& a = clean[l].population;
      const auto& b = corrupted[l].population;
      if (a.rows() != b.rows() || a.dim() != b.dim()) {
        throw ValidationError("clean and corrupted populations differ in shape");
      }
      const auto sa = pairwise_similarity(a, kind);
      const auto sb = pairwise_similarity(b, kind);
      LayerDiagnostics row;
      row.layer = l;
      row.rho_s = ranking_consistency(sa, sb);
      row.delta_f = frobenius_distance(sa, sb);
      row.rho_off = rho_off(a);
      if (opt.pool) {
        LayerScoringContext ctx{a, clean[l].cls_attention, previous_attention(clean, l), l};
        const auto part = partition(catis_score(ctx, opt.params.scoring), opt.params.triage.tau);
        if (part.merge_pool.size() >= 3) row.pool_rho_s = pool_rho_s(a, b, part.merge_pool, kind);
      }
      return row;
    }));
  }
  if (opt.energy) {
    const std::size_t last = clean.size() - 1;
    const auto& pop = clean[last].population;
    EnergyMeasurement m;
    m.np = pop.patch_count();
    m.v_pair = at_layer(last, [&] {
      return perturbation_energy(pop, EnergySignal::kPairwiseCosine, opt.energy_sigma, opt.energy_n_mc, opt.seed);
    });
    m.v_unary = at_layer(last, [&] {
      return perturbation_energy(pop, EnergySignal::kUnaryNormF, opt.energy_sigma, opt.energy_n_mc, opt.seed);
    });
    report.energy = m;
  }
  validate_report(report);

  OutputSet out(std::move(prov));
  out.add_csv("diagnostics.csv", report_csv_body(report));
  out.add_json("diagnostics.json", to_json(report));
  return out;
}

OutputSet cmd_recurrence(const RecurrenceOptions& opt, Provenance prov) {
  if (opt.L_grid.empty()) throw ValidationError("L grid is empty");
  if (opt.r_grid.empty()) throw ValidationError("r grid is empty");
  RecurrenceConfig base;
  base.epsilon0 = opt.epsilon0;
  base.alpha = opt.alpha;
  base.delta = opt.delta;
  base.T = opt.T;
  base.r = opt.r;
  base.L = opt.L_grid.front();
  base.validate();

  std::ostringstream sweep, traj, rcrit;
  sweep << "L,r,delta_L,collapsed,status\n";
  traj << "L,r,l,delta\n";
  rcrit << "L,r_crit_exact,r_crit_approx,simulate_delta_L,closed_form_delta_L\n";
  std::vector<std::pair<std::size_t, double>> exact_pts, approx_pts;

  for (std::size_t L : opt.L_grid) {
    RecurrenceConfig c = base;
    c.L = L;
    for (double r : opt.r_grid) {
      c.r = r;
      c.validate();
      sweep << L << ',' << format_double(r) << ',';
      try {
        const auto t = simulate(c);
        sweep << format_double(t.final_value()) << ',' << (t.final_value() >= c.T ? 1 : 0) << ",ok\n";
        for (std::size_t l = 0; l < t.deltas.size(); ++l) {
          traj << L << ',' << format_double(r) << ',' << l << ',' << format_double(t.deltas[l]) << '\n';
        }
      } catch (const DivergenceError& e) {
        sweep << ",1,diverged@" << e.layer() << '\n';
      }
    }
    c.r = opt.r;
    const double exact = r_crit_exact(c);
    const double approx = r_crit_approx(c);
    exact_pts.emplace_back(L, exact);
    approx_pts.emplace_back(L, approx);
    rcrit << L << ',' << format_double(exact) << ',' << format_double(approx) << ',';
    try {
      rcrit << format_double(simulate(c).final_value());
    } catch (const DivergenceError&) {
    }
    rcrit << ',';
    if (c.alpha > 0.0) rcrit << format_double(closed_form(c, L));
    rcrit << '\n';
  }

  nlohmann::ordered_json fit;
  std::size_t distinct = 0;
  {
    std::vector<std::size_t> ls = opt.L_grid;
    std::sort(ls.begin(), ls.end());
    distinct = static_cast<std::size_t>(std::unique(ls.begin(), ls.end()) - ls.begin());
  }
  fit["config"] = {{"epsilon0", opt.epsilon0}, {"alpha", opt.alpha}, {"delta", opt.delta},
                   {"T", opt.T}, {"L_grid", opt.L_grid}};
  if (distinct >= 2) {
    fit["exact"] = to_json(fit_inverse_depth(exact_pts));
    fit["approx"] = to_json(fit_inverse_depth(approx_pts));
  } else {
    nlohmann::ordered_json under = {{"slope", nullptr}, {"intercept", nullptr}, {"r2", nullptr},
                                    {"underdetermined", true}};
    fit["exact"] = under;
    fit["approx"] = under;
  }

  OutputSet out(std::move(prov));
  out.add_csv("sweep.csv", sweep.str());
  out.add_csv("rcrit.csv", rcrit.str());
  out.add_csv("trajectories.csv", traj.str());
  out.add_json("fit.json", fit);
  return out;
}

OutputSet cmd_energy(const EnergyOptions& opt, Provenance prov) {
  const auto sweep = energy_gap_sweep(opt.np_grid, opt.d, opt.sigma, opt.n_mc, opt.seed);
  std::ostringstream csv;
  csv << "np,v_pair,v_unary,ratio\n";
  for (const auto& p : sweep.points) {
    csv << p.np << ',' << format_double(p.v_pair) << ',' << format_double(p.v_unary) << ',';
    if (p.v_unary > kEnergyFloor) csv << format_double(p.v_pair / p.v_unary);
    csv << '\n';
  }
  nlohmann::ordered_json summary;
  summary["config"] = {{"np_grid", opt.np_grid}, {"d", opt.d}, {"sigma", opt.sigma},
                       {"n_mc", opt.n_mc}, {"seed", opt.seed}};
  summary["sweep"] = to_json(sweep);

  OutputSet out(std::move(prov));
  out.add_csv("energy_points.csv", csv.str());
  out.add_json("energy_summary.json", summary);
  return out;
}

ToyRun run_toy(const SynthOptions& opt, ReducerKind reducer, std::size_t r,
               const ReducerParams& params) {
  ClusterSpec cs;
  cs.n_clusters = opt.n_clusters;
  cs.tokens_per_cluster = opt.tokens_per_cluster;
  cs.d = opt.d;
  cs.center_scale = opt.center_scale;
  cs.within_std = opt.within_std;
  cs.seed = opt.seed;
  ToyModelSpec spec;
  spec.L = opt.layers;
  spec.d = opt.d;
  spec.n_heads = opt.heads;
  spec.seed = opt.seed;
  spec.reducer = reducer;
  spec.r = r;
  spec.params = params;
  return toy_forward(spec, gen_clusters(cs));
}

OutputSet cmd_synth(const SynthOptions& opt, Provenance prov) {
  ToyRun run = run_toy(opt, ReducerKind::kNone, 0, {});
  nlohmann::ordered_json summary;
  summary["layers"] = run.trace.size();
  summary["patch_tokens"] = run.trace[0].population.patch_count();
  summary["d"] = opt.d;
  OutputSet out(std::move(prov));
  add_trace(out, "trace.trc", std::move(run.trace));
  out.add_json("synth.json", summary);
  return out;
}

OutputSet cmd_reduce(const ReduceOptions& opt, Provenance prov) {
  const ReducerKind kind = parse_reducer_kind(opt.reducer);
  opt.params.scoring.validate();

  std::vector<ReductionAudit> audit;
  std::vector<TraceLayer> reduced_layers;
  std::uint32_t depth = 0;
  if (!opt.trace.empty()) {
    const LayerTrace in = load_trace(opt.trace);
    depth = in.model_depth();
    for (std::size_t l = 0; l < in.size(); ++l) {
      at_layer(l, [&] {
        const auto& layer = in[l];
        LayerScoringContext ctx{layer.population, layer.cls_attention, previous_attention(in, l), l};
        ReducerStep step = apply_reducer(kind, ctx, opt.params, opt.r);
        std::optional<std::vector<double>> attn;
        if (layer.cls_attention) {
          attn = inherit_attention(*layer.cls_attention, layer.population, step.population);
        }
        audit.push_back(std::move(step.audit));
        reduced_layers.push_back({std::move(step.population), std::move(attn)});
        return 0;
      });
    }
  } else {
    ToyRun run = run_toy(opt.synth, kind, opt.r, opt.params);
    depth = run.trace.model_depth();
    audit = std::move(run.audit);
    reduced_layers = run.trace.layers();
  }

  std::vector<std::pair<std::size_t, const TokenPopulation*>> pops;
  for (std::size_t l = 0; l < reduced_layers.size(); ++l) pops.emplace_back(l, &reduced_layers[l].population);
  const std::string groups = layered_merge_groups(pops);

  nlohmann::ordered_json parts;
  parts["reducer"] = to_string(kind);
  parts["r"] = opt.r;
  auto& layers = parts["layers"] = nlohmann::ordered_json::array();
  for (const auto& a : audit) layers.push_back(to_json(a));

  OutputSet out(std::move(prov));
  add_trace(out, "reduced.trc", LayerTrace(depth, std::move(reduced_layers)));
  out.add_json("partitions.json", parts);
  out.add_csv("merge_groups.csv", groups);
  out.add_csv("audit.csv", audit_csv_body(audit));
  return out;
}

OutputSet cmd_export_merge_groups(const ExportOptions& opt, Provenance prov) {
  const LayerTrace trace = load_trace(opt.trace);
  std::vector<std::pair<std::size_t, const TokenPopulation*>> pops;
  for (std::size_t l = 0; l < trace.size(); ++l) pops.emplace_back(l, &trace[l].population);
  OutputSet out(std::move(prov));
  out.add_csv("merge_groups.csv", layered_merge_groups(pops));
  return out;
}

}  // namespace catis::cli
