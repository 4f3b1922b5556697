#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "catis/diagnostics.hpp"
#include "catis/synth.hpp"
#include "output.hpp"

namespace catis::cli {

struct DiagnoseOptions {
  std::string trace;
  std::string corrupted;  // empty: corrupt the clean trace with sigma/seed
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string kind = "cosine";
  bool pool = false;  // add pool_rho_s over the CATIS merge pool
  ReducerParams params;
  bool energy = false;
  double energy_sigma = 0.01;
  std::size_t energy_n_mc = 200;
};

struct RecurrenceOptions {
  double epsilon0 = 0.1;
  double alpha = 0.05;
  double delta = 0.01;
  double T = 1.0;
  double r = 1.0;  // reference rate for the rcrit table's trajectory columns
  std::vector<std::size_t> L_grid{12, 24, 40};
  std::vector<double> r_grid{1, 2, 4, 8};
};

struct EnergyOptions {
  std::vector<std::size_t> np_grid{32, 64, 128, 256, 512};
  std::size_t d = 64;
  double sigma = 0.01;
  std::size_t n_mc = 500;
  std::uint64_t seed = 0;
};

struct SynthOptions {
  std::size_t n_clusters = 4;
  std::size_t tokens_per_cluster = 16;
  std::size_t d = 16;
  double center_scale = 1.0;
  double within_std = 0.5;
  std::size_t layers = 8;
  std::size_t heads = 4;
  std::uint64_t seed = 0;
};

struct ReduceOptions {
  std::string trace;  // empty: run the toy model described by `synth`
  SynthOptions synth;
  std::string reducer = "catis";
  std::size_t r = 4;
  std::string similarity = "cosine";
  ReducerParams params;
};

struct ExportOptions {
  std::string trace;
};

OutputSet cmd_diagnose(const DiagnoseOptions& opt, Provenance prov);
OutputSet cmd_recurrence(const RecurrenceOptions& opt, Provenance prov);
OutputSet cmd_energy(const EnergyOptions& opt, Provenance prov);
OutputSet cmd_synth(const SynthOptions& opt, Provenance prov);
OutputSet cmd_reduce(const ReduceOptions& opt, Provenance prov);
OutputSet cmd_export_merge_groups(const ExportOptions& opt, Provenance prov);

/// The toy-model trace described by `opt` with the given reducer.
ToyRun run_toy(const SynthOptions& opt, ReducerKind reducer, std::size_t r,
               const ReducerParams& params);

}  // namespace catis::cli
