#include <doctest.h>

#include <cmath>

#include "kuq/uq.hpp"

using namespace kuq;

namespace {

QoISampleSet make_set(std::vector<std::vector<double>> rows) {
  QoISampleSet set;
  set.rows = std::move(rows);
  set.nodes.resize(set.rows.size());
  for (std::size_t k = 0; k < set.nodes.size(); ++k)
    set.nodes[k] = static_cast<double>(k);
  return set;
}

}  // namespace

TEST_CASE("mc_estimate basics") {
  CHECK(mc_estimate(make_set({{3.0}, {3.0}, {3.0}}))[0] == 3.0);
  CHECK(mc_estimate(make_set({{0.0}, {1.0}}))[0] == 0.5);
  CHECK_THROWS_AS(mc_estimate(QoISampleSet{}), argument_error);
}

TEST_CASE("mc error decays like M^-1/2") {
  RngStream rng({7, 0, 0, StreamPurpose::Synthetic});
  const std::vector<std::size_t> ms{100, 400, 1600, 6400};
  std::vector<double> rms;
  for (std::size_t m : ms) {
    double acc = 0.0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
      double sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) sum += rng.uniform01();
      const double err = sum / m - 0.5;
      acc += err * err;
    }
    rms.push_back(std::sqrt(acc / reps));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const double x = std::log(static_cast<double>(ms[i])), y = std::log(rms[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = ms.size();
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope > -0.6);
  CHECK(slope < -0.4);
}

TEST_CASE("optimal lambda estimates") {
  SUBCASE("identical arrays give exactly one") {
    const auto set = make_set({{1.0, 5.0}, {2.0, 6.0}, {3.0, 7.0}, {4.0, 8.0}});
    const auto lam = optimal_lambda_hat(set, set, mc_estimate(set));
    for (double l : lam) CHECK(l == 1.0);
  }

  SUBCASE("independent pairs drift to zero") {
    RngStream rng({11, 0, 0, StreamPurpose::Synthetic});
    const std::size_t m = 40000;
    QoISampleSet p, c;
    for (std::size_t k = 0; k < m; ++k) {
      p.rows.push_back({rng.normal()});
      c.rows.push_back({rng.normal()});
      p.nodes.push_back(static_cast<double>(k));
      c.nodes.push_back(static_cast<double>(k));
    }
    const auto lam = optimal_lambda_hat(p, c, {0.0});
    CHECK(std::abs(lam[0]) < 3.0 / std::sqrt(static_cast<double>(m)));
  }

  SUBCASE("linear model recovers the slope") {
    RngStream rng({13, 0, 0, StreamPurpose::Synthetic});
    const std::size_t m = 40000;
    QoISampleSet p, c;
    for (std::size_t k = 0; k < m; ++k) {
      const double x = rng.normal();
      c.rows.push_back({x});
      p.rows.push_back({2.0 * x + 0.5 * rng.normal()});
      p.nodes.push_back(static_cast<double>(k));
      c.nodes.push_back(static_cast<double>(k));
    }
    const auto lam = optimal_lambda_hat(p, c, {0.0});
    CHECK(std::abs(lam[0] - 2.0) < 3.0 * 0.5 / std::sqrt(static_cast<double>(m)));
  }

  SUBCASE("degenerate control falls back to plain MC") {
    const auto p = make_set({{1.0}, {2.0}, {3.0}});
    const auto c = make_set({{4.0}, {4.0}, {4.0}});
    const auto lam = optimal_lambda_hat(p, c, {4.0});
    CHECK(lam[0] == 0.0);
    const auto est = cv_estimate(p, c, {4.0}, lam);
    CHECK(est.value[0] == mc_estimate(p)[0]);
    CHECK(est.var_cv == est.var_mc);
  }

  SUBCASE("shape and node coupling are enforced") {
    const auto p = make_set({{1.0}, {2.0}});
    auto c = make_set({{1.0}, {2.0}});
    c.nodes[1] = 99.0;
    CHECK_THROWS_AS(optimal_lambda_hat(p, c, {0.0}), argument_error);
    const auto wide = make_set({{1.0, 2.0}, {3.0, 4.0}});
    CHECK_THROWS_AS(optimal_lambda_hat(p, wide, {0.0, 0.0}), argument_error);
  }
}

TEST_CASE("field lambda aggregates the cell moments") {
  SUBCASE("identical fields give exactly one") {
    const auto set = make_set({{1.0, 5.0}, {2.0, 6.0}, {3.0, 7.0}});
    CHECK(field_lambda_hat(set, set, {0.5, 0.5}) == 1.0);
  }
  SUBCASE("linear fields recover the slope") {
    RngStream rng({19, 0, 0, StreamPurpose::Synthetic});
    QoISampleSet p, c;
    for (std::size_t k = 0; k < 20000; ++k) {
      const double x = rng.normal(), y = rng.normal();
      c.rows.push_back({x, y});
      p.rows.push_back({2.0 * x + 0.3 * rng.normal(), 2.0 * y + 0.3 * rng.normal()});
      p.nodes.push_back(static_cast<double>(k));
      c.nodes.push_back(static_cast<double>(k));
    }
    CHECK(field_lambda_hat(p, c, {0.5, 0.5}) == doctest::Approx(2.0).epsilon(0.01));
  }
  SUBCASE("degenerate control falls back to zero") {
    const auto p = make_set({{1.0}, {2.0}});
    const auto c = make_set({{3.0}, {3.0}});
    CHECK(field_lambda_hat(p, c, {1.0}) == 0.0);
  }
}

TEST_CASE("cv_estimate identities") {
  const auto p = make_set({{1.0}, {2.0}, {5.0}});

  SUBCASE("lambda = 0 reduces to plain MC") {
    const auto c = make_set({{7.0}, {8.0}, {9.0}});
    const auto est = cv_estimate(p, c, {8.0}, {0.0});
    CHECK(est.value[0] == mc_estimate(p)[0]);
  }

  SUBCASE("perfect control collapses the variance") {
    const auto mean = mc_estimate(p);
    const auto est = cv_estimate(p, p, mean, {1.0});
    CHECK(est.value[0] == mean[0]);
    CHECK(est.var_cv == 0.0);
    CHECK(est.rho_hat[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("cv estimator is unbiased and follows the variance identity") {
  // Jointly normal pair with correlation rho; exact control mean 0.
  const double rho = 0.9;
  const std::size_t m = 100;
  const int reps = 4000;
  RngStream rng({17, 0, 0, StreamPurpose::Synthetic});
  double mc_sum = 0.0, mc_sq = 0.0, cv_sum = 0.0, cv_sq = 0.0, fixed_sum = 0.0;
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
    const auto est = cv_estimate(p, c, {0.0}, lam);
    const double mc = mc_estimate(p)[0];
    mc_sum += mc;
    mc_sq += mc * mc;
    cv_sum += est.value[0];
    cv_sq += est.value[0] * est.value[0];
    // Fixed lambda keeps the estimator exactly unbiased.
    fixed_sum += cv_estimate(p, c, {0.0}, {0.7}).value[0];
  }
  const double mc_var = (mc_sq - mc_sum * mc_sum / reps) / (reps - 1);
  const double cv_var = (cv_sq - cv_sum * cv_sum / reps) / (reps - 1);
  const double ratio = cv_var / mc_var;
  // Var[q^lambda*]/Var[q] = 1 - rho^2, within sampling error of the ratio.
  CHECK(std::abs(ratio - (1.0 - rho * rho)) < 3.0 * std::sqrt(2.0 / reps) * 2.0 * (1.0 - rho * rho) + 0.01);
  // Unbiasedness at fixed lambda: true mean is 0.
  const double se_fixed = std::sqrt(mc_var / reps);
  CHECK(std::abs(fixed_sum / reps) < 4.0 * se_fixed);
}

TEST_CASE("collocation rule") {
  const UncertaintyLaw law{1, 0.0, 1.0};
  const CollocationRule rule = CollocationRule::for_uniform(20, law);
  double wsum = 0.0;
  for (double w : rule.weights) {
    CHECK(w > 0.0);
    wsum += w;
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));

  CHECK(collocation_mean([](double) { return 1.0; }, rule) == doctest::Approx(1.0));
  CHECK(collocation_mean([](double z) { return z; }, rule) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(collocation_mean([](double z) { return std::pow(z, 39); }, rule) -
                 1.0 / 40.0) < 1e-10);
  // Exactness on monomials up to degree 2n-1.
  for (int d : {3, 11, 25}) {
    const double exact = 1.0 / (d + 1.0);
    CHECK(std::abs(collocation_mean([&](double z) { return std::pow(z, d); }, rule) - exact) <
          1e-12);
  }
}

TEST_CASE("budget bound") {
  CHECK(budget_max_mmf(20000, 10, 20, 1) == 10000);
  CHECK(budget_max_mmf(50000, 10, 100, 1) == 5000);
  // Parity: N_MF = k N makes the bound collapse to M.
  CHECK(budget_max_mmf(1000, 37, 2000, 2) == 37);
  CHECK_THROWS_AS(budget_max_mmf(0, 1, 1, 1), argument_error);
}

TEST_CASE("run_mfcv wiring") {
  ModelSpec model = make_model("opinion-A");

  SUBCASE("budget gate") {
    McvConfig cfg;
    cfg.model = model;
    cfg.kind = EstimatorKind::MFCV;
    cfg.N = 100;
    cfg.M = 4;
    cfg.N_MF = 20;
    cfg.M_MF = 100;  // bound = floor(1*100*4/20) = 20
    cfg.k = 1;
    cfg.eps = 0.1;
    cfg.t_final = 0.2;
    CHECK_THROWS_AS(run_mfcv(cfg), config_error);
    cfg.M_MF = 20;  // exactly the bound
    CHECK_NOTHROW(run_mfcv(cfg));
  }

  SUBCASE("MFCV-S needs an analytic steady state") {
    McvConfig cfg;
    cfg.model = make_model("bounded-confidence");
    cfg.kind = EstimatorKind::MFCVS;
    cfg.N = 100;
    cfg.M = 2;
    cfg.eps = 0.1;
    cfg.t_final = 0.1;
    CHECK_THROWS_AS(run_mfcv(cfg), config_error);
  }

  SUBCASE("deterministic and seed-keyed primary samples across kinds") {
    McvConfig cfg;
    cfg.model = model;
    cfg.kind = EstimatorKind::MC;
    cfg.N = 400;
    cfg.M = 5;
    cfg.eps = 0.1;
    cfg.t_final = 0.5;
    cfg.N_Z = 40;
    cfg.seed = 2024;
    const auto a = run_mfcv(cfg);
    const auto b = run_mfcv(cfg);
    REQUIRE(a.size() == 1);
    for (std::size_t i = 0; i < a[0].value.size(); ++i)
      CHECK(a[0].value[i] == b[0].value[i]);

    // The same seed under MFCV-S reuses the same nodes and DSMC streams, so
    // forcing lambda to zero reproduces the MC values.
    cfg.kind = EstimatorKind::MFCVS;
    const auto cv = run_mfcv(cfg);
    const Grid1D recon{model.window.lo, model.window.hi, cfg.N_Z};
    RngStream node_rng({cfg.seed, cfg.replication, 0, StreamPurpose::NodeDraw});
    const auto nodes = RandomNodeSet::sample(model.z_law, cfg.M, node_rng);
    QoISampleSet primary;
    primary.nodes = nodes.nodes;
    for (std::size_t k = 0; k < cfg.M; ++k) {
      RngStreamSpec spec{cfg.seed, cfg.replication, static_cast<std::uint32_t>(k),
                         StreamPurpose::InitialSampling};
      const auto states =
          run_dsmc(model, cfg.N, nodes.nodes[k], cfg.eps, cfg.t_final, spec, {cfg.t_final});
      primary.rows.push_back(evaluate_qoi(states[0], cfg.qoi, recon));
    }
    const auto mc_manual = mc_estimate(primary);
    for (std::size_t i = 0; i < mc_manual.size(); ++i)
      CHECK(mc_manual[i] == a[0].value[i]);
    CHECK(cv[0].lambda_hat.size() == mc_manual.size());
  }
}
