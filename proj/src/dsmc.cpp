#include "kuq/dsmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace kuq {

double ParticleEnsemble::mean() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double ParticleEnsemble::moment(int order) const {
  double s = 0.0;
  for (double v : values) s += std::pow(v, order);
  return s / static_cast<double>(values.size());
}

std::uint64_t sround(double x, RngStream& rng) {
  if (x < 0.0) throw argument_error("sround: argument must be nonnegative");
  const double fl = std::floor(x);
  const double frac = x - fl;
  auto n = static_cast<std::uint64_t>(fl);
  if (frac > 0.0 && rng.uniform01() < frac) ++n;
  return n;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> select_pairs(std::size_t n,
                                                                  std::size_t n_pairs,
                                                                  RngStream& rng) {
  if (2 * n_pairs > n) throw invariant_error("select_pairs: more pairs than particles");
  static thread_local std::vector<std::uint32_t> perm;
  perm.resize(n);
  std::iota(perm.begin(), perm.end(), 0u);
  // Partial Fisher-Yates: only the first 2*n_pairs slots are needed.
  const std::size_t need = 2 * n_pairs;
  for (std::size_t i = 0; i < need; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(n_pairs);
  for (std::size_t c = 0; c < n_pairs; ++c) pairs[c] = {perm[2 * c], perm[2 * c + 1]};
  return pairs;
}

namespace {

// Inverse-CDF table on a fine grid, used for non-uniform initial laws.
struct InverseCdf {
  std::vector<double> w;
  std::vector<double> cdf;

  InverseCdf(const ModelSpec& model, double z, int nodes = 1 << 12) {
    const Interval win = model.window;
    w.resize(nodes + 1);
    cdf.resize(nodes + 1);
    const double dw = win.width() / nodes;
    std::vector<double> pdf(nodes + 1);
    for (int i = 0; i <= nodes; ++i) {
      w[i] = win.lo + i * dw;
      pdf[i] = model.init.density(w[i], z);
    }
    cdf[0] = 0.0;
    for (int i = 1; i <= nodes; ++i)
      cdf[i] = cdf[i - 1] + 0.5 * (pdf[i - 1] + pdf[i]) * dw;
    const double total = cdf[nodes];
    if (!(total > 0.0)) throw config_error("sample_initial: initial density has no mass");
    for (auto& c : cdf) c /= total;
  }

  double draw(RngStream& rng) const {
    const double u = rng.uniform01();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = std::min<std::size_t>(cdf.size() - 1, it - cdf.begin());
    if (i == 0) i = 1;
    const double c0 = cdf[i - 1], c1 = cdf[i];
    const double f = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
    return w[i - 1] + f * (w[i] - w[i - 1]);
  }
};

}  // namespace

ParticleEnsemble sample_initial(const ModelSpec& model, std::size_t n, double z,
                                const RngStreamSpec& seed) {
  if (n < 2) throw argument_error("sample_initial: need at least two particles");
  if (!model.z_law.contains(z)) throw argument_error("sample_initial: z outside the support");

  RngStreamSpec init_spec = seed;
  init_spec.purpose = StreamPurpose::InitialSampling;
  RngStream init_rng(init_spec);

  ParticleEnsemble ens;
  ens.z = z;
  ens.t = 0.0;
  ens.values.resize(n);
  if (model.init.kind == InitialCondition::Kind::UniformInterval) {
    const double lo = model.init.lo(z), hi = model.init.hi(z);
    for (auto& v : ens.values) v = init_rng.uniform(lo, hi);
  } else {
    InverseCdf table(model, z);
    for (auto& v : ens.values) v = table.draw(init_rng);
  }

  RngStreamSpec pair_spec = seed;
  pair_spec.purpose = StreamPurpose::Pairing;
  ens.pairing_rng = RngStream(pair_spec);
  RngStreamSpec noise_spec = seed;
  noise_spec.purpose = StreamPurpose::Noise;
  ens.noise_rng = RngStream(noise_spec);
  return ens;
}

StepStats dsmc_step(ParticleEnsemble& ens, const ModelSpec& model, double dt, double eps) {
  if (!(dt > 0.0 && dt <= eps))
    throw numeric_error("dsmc_step: requires 0 < dt <= eps (collision rate 1/eps)");
  const std::size_t n = ens.size();
  const double x = static_cast<double>(n) * (dt / eps) / 2.0;
  std::uint64_t nc = sround(x, ens.pairing_rng);
  // For odd N a full-interaction step leaves one particle unpaired; the
  // stochastic rounding of N/2 may land on the unreachable (N+1)/2.
  nc = std::min<std::uint64_t>(nc, n / 2);

  StepStats stats;
  stats.pairs = nc;
  const auto pairs = select_pairs(n, nc, ens.pairing_rng);
  for (const auto& [i, j] : pairs) {
    const double v = ens.values[i], w = ens.values[j];
    const double bound = admissible_noise_bound(v, w, ens.z, eps, model);
    const NoiseDraw dv = sample_noise(bound, eps, model, ens.noise_rng);
    const NoiseDraw dw = sample_noise(bound, eps, model, ens.noise_rng);
    if (dv.variance_deficit > 0.0) {
      ++stats.truncated_noise_draws;
      stats.variance_deficit_sum += dv.variance_deficit;
    }
    if (dw.variance_deficit > 0.0) {
      ++stats.truncated_noise_draws;
      stats.variance_deficit_sum += dw.variance_deficit;
    }
    const InteractionResult r =
        apply_interaction(v, w, ens.z, dv.eta, dw.eta, eps, model);
    stats.boundary_snaps += r.boundary_snaps;
    ens.values[i] = r.v;
    ens.values[j] = r.w;
  }
  ens.t += dt;
  ens.stats.steps += 1;
  ens.stats.pairs += stats.pairs;
  ens.stats.truncated_noise_draws += stats.truncated_noise_draws;
  ens.stats.variance_deficit_sum += stats.variance_deficit_sum;
  ens.stats.boundary_snaps += stats.boundary_snaps;
  return stats;
}

std::vector<ParticleEnsemble> run_dsmc(const ModelSpec& model, std::size_t n, double z,
                                       double eps, double t_final,
                                       const RngStreamSpec& seed,
                                       const std::vector<double>& snapshot_times) {
  if (t_final < 0.0) throw argument_error("run_dsmc: t_final must be nonnegative");
  for (std::size_t i = 1; i < snapshot_times.size(); ++i)
    if (snapshot_times[i] < snapshot_times[i - 1])
      throw argument_error("run_dsmc: snapshot times must be sorted");
  if (!snapshot_times.empty() && snapshot_times.back() > t_final + 1e-12)
    throw argument_error("run_dsmc: snapshot beyond t_final");

  const auto n_steps =
      t_final == 0.0 ? 0 : static_cast<std::uint64_t>(std::ceil(t_final / eps - 1e-12));

  // Snapshots snap to the nearest step boundary.
  std::vector<std::uint64_t> snap_steps;
  snap_steps.reserve(snapshot_times.size());
  for (double s : snapshot_times) {
    auto idx = static_cast<std::uint64_t>(std::llround(s / eps));
    snap_steps.push_back(std::min(idx, n_steps));
  }

  ParticleEnsemble ens = sample_initial(model, n, z, seed);
  std::vector<ParticleEnsemble> out;
  out.reserve(snapshot_times.size());
  std::size_t next = 0;
  while (next < snap_steps.size() && snap_steps[next] == 0) {
    out.push_back(ens);
    ++next;
  }
  for (std::uint64_t step = 1; step <= n_steps; ++step) {
    dsmc_step(ens, model, eps, eps);
    ens.t = static_cast<double>(step) * eps;  // avoid accumulation drift
    while (next < snap_steps.size() && snap_steps[next] == step) {
      out.push_back(ens);
      ++next;
    }
  }
  if (snapshot_times.empty()) out.push_back(ens);
  return out;
}

void write_ensemble_csv(const ParticleEnsemble& ens, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw numeric_error("write_ensemble_csv: cannot open " + path);
  std::fprintf(f, "state\n");
  for (double v : ens.values) std::fprintf(f, "%.17g\n", v);
  std::fclose(f);
}

}  // namespace kuq
