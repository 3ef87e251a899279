// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. --full reruns the sampling studies at paper scale.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "kuq/dsmc.hpp"
#include "kuq/harness.hpp"
#include "kuq/meanfield.hpp"
#include "kuq/qoi.hpp"
#include "kuq/quadrature.hpp"
#include "kuq/uq.hpp"

using namespace kuq;

namespace {

struct Gate {
  int failures = 0;

  void report(int criterion, bool pass, const std::string& what,
              const std::string& detail) {
    std::printf("criterion %2d [%s] %s (%s)\n", criterion, pass ? "PASS" : "FAIL",
                what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
};

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---- criterion 1: MC convergence rate ------------------------------------

void criterion_mc_rate(Gate& gate, bool full) {
  ScenarioSpec spec;
  spec.model_key = "opinion-A";
  spec.kinds = {EstimatorKind::MC};
  spec.N = full ? 20000 : 10000;
  spec.M_list = {20, 80, 320, 1280};
  spec.R = full ? 50 : 10;
  spec.eps = 0.1;
  spec.t_final = 5.0;
  spec.N_Z = 100;
  spec.reference = ReferenceKind::DsmcCollocation;
  spec.ref_runs = 100;
  spec.seed = 20240601;
  spec.threads = 0;
  const ExperimentReport report = run_experiment(spec);

  std::vector<double> lx, ly;
  for (const auto& pt : report.points) {
    lx.push_back(std::log(static_cast<double>(pt.M)));
    ly.push_back(std::log(pt.error_mean));
  }
  const double slope = fit_slope(lx, ly);
  char detail[128];
  std::snprintf(detail, sizeof detail, "log-log slope of the L2 error of E[f]: %.3f", slope);
  gate.report(1, slope > -0.65 && slope < -0.35, "MC convergence rate 1/2 over M", detail);
}

// ---- criterion 2: MFCV-S variance reduction --------------------------------

void criterion_mfcvs_gain(Gate& gate, bool full) {
  ScenarioSpec spec;
  spec.model_key = "opinion-A";
  spec.kinds = {EstimatorKind::MC, EstimatorKind::MFCVS};
  spec.N = full ? 20000 : 10000;
  spec.M_list = {20};
  spec.R = 10;
  spec.eps = 0.01;
  spec.t_final = 5.0;
  spec.N_Z = 100;
  spec.reference = ReferenceKind::SteadyCollocation;
  spec.seed = 20240602;
  spec.threads = 0;
  const ExperimentReport report = run_experiment(spec);

  double err_mc = 0.0, err_cv = 0.0;
  for (const auto& pt : report.points) {
    if (pt.kind == "MC") err_mc = pt.error_mean;
    if (pt.kind == "MFCV-S") err_cv = pt.error_mean;
  }
  const double ratio = err_mc / err_cv;
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "L2 error of E[f]: MC %.4e, MFCV-S %.4e, ratio %.1f", err_mc, err_cv, ratio);
  gate.report(2, ratio >= 10.0, "MFCV-S beats MC by >= 10x at M = 20", detail);
}

// ---- criterion 3: MFCV transient superiority -------------------------------

void criterion_mfcv_transient(Gate& gate, bool full) {
  ScenarioSpec spec;
  spec.model_key = "opinion-A";
  spec.kinds = {EstimatorKind::MFCVS, EstimatorKind::MFCV};
  spec.N = 20000;
  spec.M_list = {10, 20, 40};
  spec.N_MF = 20;
  spec.M_MF = 10000;
  spec.k = 1;
  spec.R = full ? 50 : 10;
  spec.eps = 0.01;
  spec.t_final = 0.1;
  spec.N_Z = 100;
  spec.reference = ReferenceKind::FpFine;
  spec.seed = 20240603;
  spec.threads = 0;
  const ExperimentReport report = run_experiment(spec);

  bool all_below = true;
  std::string detail;
  for (std::size_t m : spec.M_list) {
    double e_s = 0.0, e_t = 0.0;
    for (const auto& pt : report.points) {
      if (pt.M != m) continue;
      if (pt.kind == "MFCV-S") e_s = pt.error_mean;
      if (pt.kind == "MFCV") e_t = pt.error_mean;
    }
    all_below = all_below && e_t <= e_s;
    char buf[96];
    std::snprintf(buf, sizeof buf, "M=%zu: MFCV %.3e vs MFCV-S %.3e; ", m, e_t, e_s);
    detail += buf;
  }
  gate.report(3, all_below, "MFCV error below MFCV-S at t = 0.1 for every M", detail);
}

// ---- criterion 4: variance identity ----------------------------------------

void criterion_variance_identity(Gate& gate) {
  const std::size_t m = 100;
  const int reps = 1000;
  bool pass = true;
  std::string detail;
  for (double rho : {0.0, 0.5, 0.9, 0.99}) {
    RngStream rng({static_cast<std::uint64_t>(1000 + rho * 100), 0, 0,
                   StreamPurpose::Synthetic});
    std::vector<double> mc(reps), cv(reps);
    for (int r = 0; r < reps; ++r) {
      QoISampleSet p, c;
      for (std::size_t k = 0; k < m; ++k) {
        const double x = rng.normal();
        const double q = rho * x + std::sqrt(1.0 - rho * rho) * rng.normal();
        p.rows.push_back({q});
        c.rows.push_back({x});
        p.nodes.push_back(static_cast<double>(k));
        c.nodes.push_back(static_cast<double>(k));
      }
      const auto lam = optimal_lambda_hat(p, c, {0.0});
      cv[r] = cv_estimate(p, c, {0.0}, lam).value[0];
      mc[r] = mc_estimate(p)[0];
    }
    auto mean_of = [&](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / v.size();
    };
    const double mu_cv = mean_of(cv), mu_mc = mean_of(mc);
    std::vector<double> X(reps), Y(reps);
    for (int r = 0; r < reps; ++r) {
      X[r] = (cv[r] - mu_cv) * (cv[r] - mu_cv);
      Y[r] = (mc[r] - mu_mc) * (mc[r] - mu_mc);
    }
    const double v_cv = mean_of(X), v_mc = mean_of(Y);
    double var_x = 0, var_y = 0, cov_xy = 0;
    for (int r = 0; r < reps; ++r) {
      var_x += (X[r] - v_cv) * (X[r] - v_cv);
      var_y += (Y[r] - v_mc) * (Y[r] - v_mc);
      cov_xy += (X[r] - v_cv) * (Y[r] - v_mc);
    }
    var_x /= reps - 1;
    var_y /= reps - 1;
    cov_xy /= reps - 1;
    const double ratio = v_cv / v_mc;
    // Delta-method standard error of the variance ratio over replications.
    const double se = ratio * std::sqrt(std::max(
                                  0.0, var_x / (v_cv * v_cv) + var_y / (v_mc * v_mc) -
                                           2.0 * cov_xy / (v_cv * v_mc)) /
                              reps);
    const double target = 1.0 - rho * rho;
    const bool ok = std::abs(ratio - target) <= 3.0 * se;
    pass = pass && ok;
    char buf[96];
    std::snprintf(buf, sizeof buf, "rho=%.2f: ratio %.4f vs %.4f (3se %.4f); ", rho, ratio,
                  target, 3.0 * se);
    detail += buf;
  }
  gate.report(4, pass, "Var[q^lambda*]/Var[q] = 1 - rho^2 on synthetic pairs", detail);
}

// ---- criterion 5: FP structure preservation --------------------------------

void criterion_fp_preservation(Gate& gate) {
  struct Case {
    const char* name;
    ModelSpec model;
    SteadyStateParams params;
    Grid1D grid;
    double z;
  };
  ModelSpec beta_model = make_model("opinion-A");
  beta_model.noise.sigma2 = 0.25;
  std::vector<Case> cases = {
      {"maxwellian(Test-1-B)", make_model("opinion-B"),
       {SteadyFamily::MaxwellianLike, 0.0, 0.1, 0.875}, {-1.0, 1.0, 80}, 0.5},
      {"beta", beta_model, {SteadyFamily::Beta, 0.0, 0.25, 1.0}, {-1.0, 1.0, 80}, 0.0},
      // dw = 0.05 resolves the steep left flank of the mu = 21 law.
      {"inverse-gamma", make_model("wealth-A"), {SteadyFamily::InverseGamma, 1.0, 0.1, 1.0},
       {1e-6, 10.0, 200}, 0.0},
  };
  bool pass = true;
  std::string detail;
  for (auto& c : cases) {
    SteadyStateDensity steady(c.params, c.model.domain);
    GridDensity f = project_cell_centers([&](double w) { return steady(w); }, c.grid, c.z);
    const GridDensity f0 = f;
    const double mass0 = f.mass();
    for (int s = 0; s < 100; ++s) fp_step(f, 0.01, c.model);
    double num = 0, den = 0;
    for (int i = 0; i < c.grid.n; ++i) {
      num += (f.values[i] - f0.values[i]) * (f.values[i] - f0.values[i]);
      den += f0.values[i] * f0.values[i];
    }
    const double change = std::sqrt(num / den);
    const double drift = std::abs(f.mass() - mass0);
    const bool ok = change <= 1e-8 && drift <= 1e-12;
    pass = pass && ok;
    char buf[112];
    std::snprintf(buf, sizeof buf, "%s: change %.2e, mass drift %.2e; ", c.name, change, drift);
    detail += buf;
  }
  gate.report(5, pass, "100 steps preserve each analytic steady state", detail);
}

// ---- criterion 6: steady-state analytics -----------------------------------

void criterion_steady_analytics(Gate& gate) {
  bool pass = true;
  std::string detail;

  const std::vector<SteadyStateParams> families = {
      {SteadyFamily::Beta, 0.1, 0.25, 1.0},
      {SteadyFamily::MaxwellianLike, 0.0, 0.1, 0.875},
      {SteadyFamily::InverseGamma, 1.0, 1.0, 1.0},
  };
  for (const auto& p : families) {
    const bool half_line = p.family == SteadyFamily::InverseGamma;
    SteadyStateDensity f(p, half_line ? Interval{0.0, kInf} : Interval{-1.0, 1.0});
    const double hi = half_line ? 1e4 : 1.0;
    const double lo = half_line ? 0.0 : -1.0;
    const double mass = integrate([&](double w) { return f(w); }, lo, hi, 1e-11, 1e-14);
    if (std::abs(mass - 1.0) > 1e-8) pass = false;
    char buf[64];
    std::snprintf(buf, sizeof buf, "mass %.10f; ", mass);
    detail += buf;
  }

  SteadyStateDensity ig({SteadyFamily::InverseGamma, 1.0, 1.0, 1.0}, {0.0, kInf});
  const double mean = integrate([&](double w) { return w * ig(w); }, 0.0, 1e4, 1e-10, 1e-13);
  if (std::abs(mean - 1.0) > 1e-6) pass = false;
  char buf[64];
  std::snprintf(buf, sizeof buf, "invgamma mean %.8f; ", mean);
  detail += buf;

  double worst = 0.0;
  for (double w : {-1.0, -0.6, -0.2, 0.0, 0.3, 0.8, 1.0})
    worst = std::max(worst,
                     std::abs(steady_state_density({SteadyFamily::Beta, 0.0, 1.0, 1.0}, w) - 0.5));
  if (worst > 1e-12) pass = false;
  std::snprintf(buf, sizeof buf, "beta(m=0,s2=1) dev %.1e", worst);
  detail += buf;

  gate.report(6, pass, "steady states normalize, mean and flat-beta checks", detail);
}

// ---- criterion 7: DSMC conservation ----------------------------------------

void criterion_dsmc_conservation(Gate& gate) {
  const ModelSpec model = make_model("wealth-A");
  const std::size_t n = 10000;
  const int steps = 100;
  const double eps = 0.01;
  bool pass = true;
  double worst_ratio = 0.0;
  for (int r = 0; r < 100; ++r) {
    auto ens = sample_initial(model, n, 0.0, {777, static_cast<std::uint32_t>(r), 0});
    const double m0 = ens.mean();
    for (int s = 0; s < steps; ++s) dsmc_step(ens, model, eps, eps);
    double sq = 0.0;
    const double m1 = ens.mean();
    for (double v : ens.values) {
      if (v < 0.0) pass = false;
      sq += (v - m1) * (v - m1);
    }
    const double sd = std::sqrt(sq / (n - 1));
    const double bound = 4.0 * (sd / std::sqrt(static_cast<double>(n))) *
                         std::sqrt(static_cast<double>(steps));
    const double drift = std::abs(m1 - m0);
    worst_ratio = std::max(worst_ratio, drift / bound);
    if (drift > bound) pass = false;
  }
  char detail[96];
  std::snprintf(detail, sizeof detail, "worst drift/bound over 100 runs: %.3f", worst_ratio);
  gate.report(7, pass, "wealth mean random walk within bound, states nonnegative", detail);
}

// ---- criterion 8: estimator algebra oracles ---------------------------------

void criterion_estimator_algebra(Gate& gate) {
  bool pass = true;
  std::string detail;

  QoISampleSet s;
  s.rows = {{1.0}, {4.0}, {9.0}, {16.0}};
  s.nodes = {1, 2, 3, 4};
  const auto lam1 = optimal_lambda_hat(s, s, mc_estimate(s));
  if (lam1[0] != 1.0) pass = false;
  detail += "lambda(identical) = " + std::to_string(lam1[0]) + "; ";

  RngStream rng({880, 0, 0, StreamPurpose::Synthetic});
  const std::size_t m = 40000;
  QoISampleSet p, c;
  for (std::size_t k = 0; k < m; ++k) {
    const double x = rng.normal();
    c.rows.push_back({x});
    p.rows.push_back({2.0 * x + 0.5 * rng.normal()});
    p.nodes.push_back(static_cast<double>(k));
    c.nodes.push_back(static_cast<double>(k));
  }
  const double lam2 = optimal_lambda_hat(p, c, {0.0})[0];
  const double se = 0.5 / std::sqrt(static_cast<double>(m));
  if (std::abs(lam2 - 2.0) > 3.0 * se) pass = false;
  char buf[64];
  std::snprintf(buf, sizeof buf, "lambda(linear) = %.4f; ", lam2);
  detail += buf;

  const CollocationRule rule = CollocationRule::for_uniform(20, {1, 0.0, 1.0});
  const double z39 = collocation_mean([](double z) { return std::pow(z, 39); }, rule);
  if (std::abs(z39 - 1.0 / 40.0) > 1e-10) pass = false;
  std::snprintf(buf, sizeof buf, "z^39 -> %.14f", z39);
  detail += buf;

  gate.report(8, pass, "lambda identities and collocation exactness", detail);
}

// ---- criterion 9: QoI oracles ------------------------------------------------

void criterion_qoi_oracles(Gate& gate) {
  bool pass = true;
  std::string detail;

  ParticleEnsemble equal;
  equal.values.assign(256, 1.0);
  const double g_equal = gini(lorenz_curve(equal));
  if (g_equal != 0.0) pass = false;

  ParticleEnsemble two;
  two.values = {0.0, 1.0};
  const double g_two = gini(lorenz_curve(two));
  if (g_two != 0.5) pass = false;

  ParticleEnsemble base;
  base.values = {1.0, 2.0, 3.0, 5.0};
  const auto ref = lorenz_curve(base);
  bool bitwise = true;
  for (double cscale : {2.0, 0.5, 4.0}) {
    ParticleEnsemble scaled;
    for (double w : base.values) scaled.values.push_back(cscale * w);
    const auto cur = lorenz_curve(scaled);
    for (std::size_t j = 0; j < ref.wealth.size(); ++j)
      if (cur.wealth[j] != ref.wealth[j]) bitwise = false;
  }
  if (!bitwise) pass = false;

  char buf[96];
  std::snprintf(buf, sizeof buf, "gini(equal)=%g, gini({0,1})=%g, scale-invariance %s",
                g_equal, g_two, bitwise ? "bitwise" : "BROKEN");
  detail = buf;
  gate.report(9, pass, "Gini and Lorenz oracles", detail);
}

// ---- criterion 10: budget gate ------------------------------------------------

void criterion_budget_gate(Gate& gate) {
  bool pass = true;
  std::string detail;

  McvConfig cfg;
  cfg.model = make_model("opinion-A");
  cfg.kind = EstimatorKind::MFCV;
  cfg.N = 20000;
  cfg.M = 10;
  cfg.N_MF = 20;
  cfg.k = 1;
  cfg.eps = 0.1;
  cfg.t_final = 0.1;
  cfg.N_Z = 20;

  cfg.M_MF = 10001;  // one above floor(k N M / N_MF) = 10000
  bool rejected = false;
  try {
    run_mfcv(cfg);
  } catch (const config_error&) {
    rejected = true;
  }
  if (!rejected) pass = false;
  detail += rejected ? "M_MF=10001 rejected; " : "M_MF=10001 WRONGLY ACCEPTED; ";

  cfg.M_MF = 10000;  // the Test-3 set, exactly at the bound
  bool accepted = true;
  try {
    run_mfcv(cfg);
  } catch (const config_error&) {
    accepted = false;
  }
  if (!accepted) pass = false;
  detail += accepted ? "Test-3 set accepted at the bound" : "Test-3 set WRONGLY REJECTED";

  gate.report(10, pass, "cost bound floor(kNM/N_MF) gates M_MF", detail);
}

}  // namespace

int main(int argc, char** argv) {
  bool full = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--full") == 0) full = true;

  std::printf("acceptance suite (%s scale)\n", full ? "paper" : "desk");
  Gate gate;
  criterion_mc_rate(gate, full);
  criterion_mfcvs_gain(gate, full);
  criterion_mfcv_transient(gate, full);
  criterion_variance_identity(gate);
  criterion_fp_preservation(gate);
  criterion_steady_analytics(gate);
  criterion_dsmc_conservation(gate);
  criterion_estimator_algebra(gate);
  criterion_qoi_oracles(gate);
  criterion_budget_gate(gate);

  if (gate.failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) FAILED\n", gate.failures);
  return 1;
}
