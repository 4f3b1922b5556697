#include "catis/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "catis/error.hpp"
#include "commands.hpp"

namespace catis::cli {

namespace {

// Flat key=value config files: keys without a section belong to the
// subcommand being run.
class FlatConfig : public CLI::ConfigINI {
 public:
  explicit FlatConfig(std::string section) : section_(std::move(section)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    for (auto& item : items) {
      if (item.parents.empty() && item.name != "--" && item.name != "++") item.parents = {section_};
    }
    return items;
  }

 private:
  std::string section_;
};

// Options that do not change results and so stay out of the config hash.
bool hashed(const CLI::Option* opt) {
  const std::string name = opt->get_single_name();
  return name != "help" && name != "config" && name != "out-dir";
}

// Canonical name=value listing of every resolved option, sorted by name.
std::uint64_t config_hash(const std::string& command, const CLI::App& sub) {
  std::map<std::string, std::string> kv;
  for (const CLI::Option* opt : sub.get_options()) {
    if (!hashed(opt)) continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    kv[opt->get_single_name()] = value;
  }
  std::string text = command + "\n";
  for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
  return fnv1a(text);
}

void add_scoring(CLI::App* sub, ReducerParams& p) {
  sub->add_option("--gamma", p.scoring.gamma, "momentum coefficient")->check(CLI::NonNegativeNumber);
  sub->add_option("--w-cls", p.scoring.w_cls, "fusion weight of the CLS branch")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--l-start", p.scoring.l_start, "first layer using the CLS branch")->check(CLI::PositiveNumber);
  sub->add_option("--sigma-floor", p.scoring.sigma_floor, "lower bound on per-dimension std");
  sub->add_option("--tau", p.triage.tau, "triage threshold")->check(CLI::NonNegativeNumber);
  sub->add_option("--evict-ratio", p.triage.evict_ratio, "share of r sent to eviction")->check(CLI::Range(0.0, 1.0));
}

void add_synth(CLI::App* sub, SynthOptions& s) {
  sub->add_option("--n-clusters", s.n_clusters, "clusters in the toy input");
  sub->add_option("--tokens-per-cluster", s.tokens_per_cluster, "patch tokens per cluster");
  sub->add_option("--d", s.d, "feature width");
  sub->add_option("--center-scale", s.center_scale, "std of cluster centers");
  sub->add_option("--within-std", s.within_std, "std of tokens around their center");
  sub->add_option("--layers", s.layers, "toy model depth");
  sub->add_option("--heads", s.heads, "attention heads");
  sub->add_option("--seed", s.seed, "seed for data and weights");
}

ReducerParams default_params() {
  ReducerParams p;
  p.scoring.gamma = 0.5;
  p.scoring.w_cls = 0.5;
  p.scoring.l_start = 3;
  p.triage.tau = 1.0;
  p.triage.evict_ratio = 0.5;
  return p;
}

}  // namespace

int exit_code_for(const std::exception& e) noexcept {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::kFormat:
      case ErrorKind::kIo:
        return kIoFailure;
      case ErrorKind::kCapacity:
      case ErrorKind::kDivergence:
        return kCapacityFailure;
      default:
        return kValidationFailure;
    }
  }
  return kValidationFailure;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"catis: token-reduction collapse diagnostics and simulators", "catis"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", kToolVersion);

  // the config file's flat keys are routed to the subcommand named on the line
  std::string command;
  for (const auto& a : args) {
    if (!a.empty() && a[0] != '-') {
      command = a;
      break;
    }
  }
  app.config_formatter(std::make_shared<FlatConfig>(command));
  app.set_config("--config", "", "flat key=value file; flags on the command line win");

  std::string out_dir;
  std::function<OutputSet(Provenance)> job;

  DiagnoseOptions diag;
  diag.params = default_params();
  auto* d = app.add_subcommand("diagnose", "rho_s, delta_f, rho_off per layer of a trace");
  d->add_option("--trace", diag.trace, "clean TRC trace")->required();
  auto* corr = d->add_option("--corrupted", diag.corrupted, "corrupted TRC trace");
  d->add_option("--sigma", diag.sigma, "Gaussian corruption std when no corrupted trace is given")
      ->excludes(corr);
  d->add_option("--seed", diag.seed, "corruption and Monte-Carlo seed");
  d->add_option("--similarity", diag.kind, "cosine or dot")->check(CLI::IsMember({"cosine", "dot"}));
  d->add_flag("--pool", diag.pool, "also report pool_rho_s over the CATIS merge pool");
  add_scoring(d, diag.params);
  d->add_flag("--energy", diag.energy, "measure perturbation energy on the last layer");
  d->add_option("--energy-sigma", diag.energy_sigma, "perturbation std for --energy");
  d->add_option("--energy-n-mc", diag.energy_n_mc, "Monte-Carlo draws for --energy");
  d->add_option("--out-dir", out_dir, "output directory")->required();
  d->callback([&] { job = [&](Provenance p) { return cmd_diagnose(diag, std::move(p)); }; });

  RecurrenceOptions rec;
  auto* r = app.add_subcommand("recurrence", "distortion recurrence sweep, r_crit table and 1/L fit");
  r->add_option("--epsilon0", rec.epsilon0, "baseline distortion rate");
  r->add_option("--alpha", rec.alpha, "feedback coupling");
  r->add_option("--delta", rec.delta, "per-operation damage intensity");
  r->add_option("--T", rec.T, "collapse threshold");
  r->add_option("--r", rec.r, "reference rate for the rcrit table");
  r->add_option("--L-grid", rec.L_grid, "depths, comma separated")->delimiter(',');
  r->add_option("--r-grid", rec.r_grid, "rates, comma separated")->delimiter(',');
  r->add_option("--out-dir", out_dir, "output directory")->required();
  r->callback([&] { job = [&](Provenance p) { return cmd_recurrence(rec, std::move(p)); }; });

  EnergyOptions en;
  auto* e = app.add_subcommand("energy", "pairwise vs unary perturbation-energy sweep");
  e->add_option("--np-grid", en.np_grid, "population sizes, comma separated")->delimiter(',');
  e->add_option("--d", en.d, "feature width");
  e->add_option("--sigma", en.sigma, "perturbation std");
  e->add_option("--n-mc", en.n_mc, "Monte-Carlo draws per population");
  e->add_option("--seed", en.seed, "seed");
  e->add_option("--out-dir", out_dir, "output directory")->required();
  e->callback([&] { job = [&](Provenance p) { return cmd_energy(en, std::move(p)); }; });

  SynthOptions syn;
  auto* s = app.add_subcommand("synth", "write a toy-model trace");
  add_synth(s, syn);
  s->add_option("--out-dir", out_dir, "output directory")->required();
  s->callback([&] { job = [&](Provenance p) { return cmd_synth(syn, std::move(p)); }; });

  ReduceOptions red;
  red.params = default_params();
  auto* rd = app.add_subcommand("reduce", "apply a layer operator to a trace or a toy model");
  rd->add_option("--trace", red.trace, "TRC trace; omit to run the toy model");
  add_synth(rd, red.synth);
  rd->add_option("--reducer", red.reducer, "none, tome, catis, topk-evict, topk-merge")
      ->check(CLI::IsMember({"none", "tome", "catis", "topk-evict", "topk-merge"}));
  rd->add_option("--r", red.r, "tokens removed per layer");
  rd->add_option("--similarity", red.similarity, "cosine or dot, for bipartite matching")
      ->check(CLI::IsMember({"cosine", "dot"}));
  add_scoring(rd, red.params);
  rd->add_option("--out-dir", out_dir, "output directory")->required();
  rd->callback([&] {
    red.params.triage.kind = parse_similarity_kind(red.similarity);
    job = [&](Provenance p) { return cmd_reduce(red, std::move(p)); };
  });

  ExportOptions ex;
  auto* x = app.add_subcommand("export-merge-groups", "per-layer token sizes and patch groups of a trace");
  x->add_option("--trace", ex.trace, "TRC trace")->required();
  x->add_option("--out-dir", out_dir, "output directory")->required();
  x->callback([&] { job = [&](Provenance p) { return cmd_export_merge_groups(ex, std::move(p)); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << "error (usage): " << pe.what() << '\n';
    return kValidationFailure;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  try {
    Provenance prov{chosen->get_name(), config_hash(chosen->get_name(), *chosen)};
    OutputSet outputs = job(prov);
    for (const auto& path : outputs.write(out_dir)) out << path.string() << '\n';
    return kOk;
  } catch (const Error& ex_) {
    err << "error (" << to_string(ex_.kind()) << "): " << ex_.what() << '\n';
    return exit_code_for(ex_);
  } catch (const std::exception& ex_) {
    err << "error: " << ex_.what() << '\n';
    return kValidationFailure;
  }
}

}  // namespace catis::cli
