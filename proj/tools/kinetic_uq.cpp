#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "kuq/dsmc.hpp"
#include "kuq/harness.hpp"
#include "kuq/meanfield.hpp"
#include "kuq/qoi.hpp"
#include "kuq/uq.hpp"

namespace {

int thread_count_from_env() {
  const char* env = std::getenv("KINETIC_UQ_THREADS");
  if (!env) return 0;
  const int n = std::atoi(env);
  return n > 0 ? n : 0;
}

int cmd_catalog() {
  for (const auto& key : kuq::catalog_keys())
    std::printf("%-20s %s\n", key.c_str(), kuq::model_description(key).c_str());
  return 0;
}

int cmd_run(const std::string& scenario_path, const std::string& out_override,
            long long seed_override, int reps_override, int threads_override) {
  kuq::ScenarioSpec spec = kuq::load_scenario_file(scenario_path);
  if (!out_override.empty()) spec.out_dir = out_override;
  if (seed_override >= 0) spec.seed = static_cast<std::uint64_t>(seed_override);
  if (reps_override > 0) spec.R = reps_override;
  if (threads_override > 0)
    spec.threads = threads_override;
  else if (spec.threads == 0)
    spec.threads = thread_count_from_env();
  spec.validate();

  const kuq::ExperimentReport report = kuq::run_experiment(spec);
  kuq::emit_report(report, spec.out_dir);
  std::printf("wrote %s/report.json (%zu points, config %s)\n", spec.out_dir.c_str(),
              report.points.size(), report.config_hash.c_str());
  for (const auto& pt : report.points)
    std::printf("  %-7s M=%-5zu %-12s t=%-6g error=%.6e (+/- %.2e)\n", pt.kind.c_str(),
                pt.M, pt.qoi.c_str(), pt.t, pt.error_mean, pt.error_stderr);
  return 0;
}

struct VerifyState {
  int failures = 0;

  void check(bool ok, const std::string& name) {
    std::printf("%s  %s\n", ok ? "PASS" : "FAIL", name.c_str());
    if (!ok) ++failures;
  }
};

// Quick invariant sweep over the catalog; a slimmed-down version of the
// acceptance suite meant to run in seconds.
int cmd_verify() {
  using namespace kuq;
  VerifyState v;

  {  // mean conservation under zero noise
    ModelSpec model = make_model("opinion-B");
    model.noise.sigma2 = 0.0;
    RngStream rng({7, 0, 0, StreamPurpose::Synthetic});
    bool ok = true;
    for (int i = 0; i < 1000 && ok; ++i) {
      const double z = model.z_law.sample(rng);
      const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
      const auto r = apply_interaction(a, b, z, 0.0, 0.0, 0.05, model);
      ok = std::abs((r.v + r.w) - (a + b)) < 1e-14;
    }
    v.check(ok, "zero-noise binary interactions conserve the pair sum");
  }
  {  // domain closure under admissible noise
    ModelSpec model = make_model("opinion-A");
    RngStream rng({11, 0, 0, StreamPurpose::Synthetic});
    bool ok = true;
    for (int i = 0; i < 20000 && ok; ++i) {
      const double z = model.z_law.sample(rng);
      const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
      const double bound = admissible_noise_bound(a, b, z, 0.1, model);
      const double ea = rng.uniform(-bound, bound), eb = rng.uniform(-bound, bound);
      const auto r = apply_interaction(a, b, z, ea, eb, 0.1, model);
      ok = model.domain.contains(r.v) && model.domain.contains(r.w);
    }
    v.check(ok, "admissible noise keeps post states in V");
  }
  {  // FP mass conservation and steady-state preservation (beta family)
    ModelSpec model = make_model("opinion-A");
    model.noise.sigma2 = 0.25;
    model.steady = [](double z) {
      return SteadyStateParams{SteadyFamily::Beta, z / 4.0, 0.25, 1.0};
    };
    const Grid1D grid{-1.0, 1.0, 64};
    SteadyStateDensity steady(model.steady(0.0), model.domain);
    GridDensity f = project_cell_centers([&](double w) { return steady(w); }, grid, 0.0);
    const GridDensity f0 = f;
    for (int s = 0; s < 20; ++s) fp_step(f, 0.01, model);
    double diff = 0.0, norm = 0.0;
    for (int i = 0; i < grid.n; ++i) {
      diff += (f.values[i] - f0.values[i]) * (f.values[i] - f0.values[i]);
      norm += f0.values[i] * f0.values[i];
    }
    v.check(std::sqrt(diff / norm) < 1e-9, "FP scheme preserves the beta steady state");
    v.check(std::abs(f.mass() - f0.mass()) < 1e-12, "FP scheme conserves mass");
  }
  {  // estimator algebra
    QoISampleSet a;
    a.rows = {{1.0}, {2.0}, {3.0}, {4.0}};
    a.nodes = {0.1, 0.2, 0.3, 0.4};
    const auto lam = optimal_lambda_hat(a, a, mc_estimate(a));
    v.check(lam.size() == 1 && lam[0] == 1.0, "lambda* = 1 on identical sample arrays");
  }
  {  // budget gate
    bool rejected = false;
    try {
      McvConfig cfg;
      cfg.model = make_model("opinion-A");
      cfg.kind = EstimatorKind::MFCV;
      cfg.N = 100;
      cfg.M = 2;
      cfg.N_MF = 20;
      cfg.M_MF = 100;  // bound is 10
      cfg.k = 1;
      run_mfcv(cfg);
    } catch (const config_error&) {
      rejected = true;
    }
    v.check(rejected, "cost bound rejects oversized M_MF");
    v.check(budget_max_mmf(20000, 10, 20, 1) == 10000, "Test-3 budget sits exactly at the bound");
  }

  std::printf("%s\n", v.failures == 0 ? "verify: all checks passed" : "verify: FAILURES");
  return v.failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinetic-uq: DSMC + mean-field control variate solver for uncertain kinetic models"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a scenario file");
  std::string scenario, out;
  long long seed = -1;
  int reps = 0, threads = 0;
  run->add_option("scenario", scenario, "scenario file")->required();
  run->add_option("--out", out, "output directory override");
  run->add_option("--seed", seed, "master seed override");
  run->add_option("--replications", reps, "replication count override");
  run->add_option("--threads", threads, "worker thread count (default: env/auto)");

  auto* catalog = app.add_subcommand("catalog", "list model keys");
  auto* verify = app.add_subcommand("verify", "run the quick invariant suite");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(scenario, out, seed, reps, threads);
    if (catalog->parsed()) return cmd_catalog();
    if (verify->parsed()) return cmd_verify();
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const kuq::config_error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const kuq::argument_error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  }
  return 0;
}
