#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kuq/models.hpp"
#include "kuq/rng.hpp"

namespace kuq {

// Running diagnostics of a DSMC trajectory. The noise variance deficit near
// the boundary is accumulated here rather than hidden.
struct DsmcStats {
  std::uint64_t steps{0};
  std::uint64_t pairs{0};
  std::uint64_t truncated_noise_draws{0};
  double variance_deficit_sum{0.0};
  std::uint64_t boundary_snaps{0};
};

struct ParticleEnsemble {
  std::vector<double> values;
  double z{0.0};
  double t{0.0};
  RngStream pairing_rng;
  RngStream noise_rng;
  DsmcStats stats;

  std::size_t size() const { return values.size(); }
  double mean() const;
  double moment(int order) const;
};

// Per-step report from dsmc_step.
struct StepStats {
  std::size_t pairs{0};
  std::uint64_t truncated_noise_draws{0};
  double variance_deficit_sum{0.0};
  std::uint64_t boundary_snaps{0};
};

// Stochastic rounding: floor(x)+1 with probability frac(x), expectation x.
std::uint64_t sround(double x, RngStream& rng);

// N_c disjoint pairs drawn uniformly over disjoint pairings: a uniform
// random permutation read off in consecutive blocks of two.
std::vector<std::pair<std::uint32_t, std::uint32_t>> select_pairs(std::size_t n,
                                                                  std::size_t n_pairs,
                                                                  RngStream& rng);

// N i.i.d. draws from f_0(., z); t = 0.
ParticleEnsemble sample_initial(const ModelSpec& model, std::size_t n, double z,
                                const RngStreamSpec& seed);

// One DSMC step of size dt <= eps; mutates the ensemble in place.
StepStats dsmc_step(ParticleEnsemble& ens, const ModelSpec& model, double dt, double eps);

// Advances with dt = eps for ceil(t_final/eps) steps and returns ensembles at
// the requested snapshot times (snapped to step boundaries).
std::vector<ParticleEnsemble> run_dsmc(const ModelSpec& model, std::size_t n, double z,
                                       double eps, double t_final,
                                       const RngStreamSpec& seed,
                                       const std::vector<double>& snapshot_times);

// Debug export, one state per row. Not a stability-guaranteed format.
void write_ensemble_csv(const ParticleEnsemble& ens, const std::string& path);

}  // namespace kuq
