#include "kuq/uq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kuq/dsmc.hpp"
#include "kuq/parallel.hpp"
#include "kuq/quadrature.hpp"

namespace kuq {

RandomNodeSet RandomNodeSet::sample(const UncertaintyLaw& law, std::size_t m,
                                    RngStream& rng) {
  RandomNodeSet set;
  set.nodes.resize(m);
  for (auto& z : set.nodes) z = law.sample(rng);
  return set;
}

void QoISampleSet::validate() const {
  if (rows.empty()) throw argument_error("QoISampleSet: empty sample set");
  if (nodes.size() != rows.size())
    throw argument_error("QoISampleSet: node bookkeeping out of sync");
  const std::size_t d = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != d) throw argument_error("QoISampleSet: ragged rows");
    for (double v : r)
      if (!std::isfinite(v)) throw numeric_error("QoISampleSet: non-finite entry");
  }
}

CollocationRule CollocationRule::for_uniform(int n, const UncertaintyLaw& law) {
  if (n < 1) throw argument_error("CollocationRule: need at least one node");
  const QuadratureRule gl = gauss_legendre(n);
  CollocationRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double c = 0.5 * (law.lo + law.hi);
  const double h = 0.5 * (law.hi - law.lo);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = c + h * gl.nodes[i];
    rule.weights[i] = 0.5 * gl.weights[i];  // uniform density on the support
  }
  return rule;
}

std::vector<double> collocation_mean(
    const std::function<std::vector<double>(double)>& integrand,
    const CollocationRule& rule) {
  std::vector<double> mean;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const std::vector<double> v = integrand(rule.nodes[j]);
    if (mean.empty()) mean.assign(v.size(), 0.0);
    if (v.size() != mean.size())
      throw argument_error("collocation_mean: integrand changed shape");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]))
        throw numeric_error("collocation_mean: non-finite integrand value");
      mean[i] += rule.weights[j] * v[i];
    }
  }
  return mean;
}

double collocation_mean(const std::function<double(double)>& integrand,
                        const CollocationRule& rule) {
  return collocation_mean(
      [&](double z) { return std::vector<double>{integrand(z)}; }, rule)[0];
}

std::vector<double> mc_estimate(const QoISampleSet& samples) {
  samples.validate();
  const std::size_t m = samples.count(), d = samples.dim();
  std::vector<double> mean(d, 0.0);
  for (const auto& row : samples.rows)
    for (std::size_t i = 0; i < d; ++i) mean[i] += row[i];
  for (auto& v : mean) v /= static_cast<double>(m);
  return mean;
}

namespace {

void check_coupling(const QoISampleSet& primary, const QoISampleSet& control) {
  if (primary.count() != control.count() || primary.dim() != control.dim())
    throw argument_error("control samples do not match the primary shape");
  for (std::size_t k = 0; k < primary.nodes.size(); ++k)
    if (primary.nodes[k] != control.nodes[k])
      throw argument_error("control variate evaluated at different nodes than the primary");
}

}  // namespace

std::vector<double> optimal_lambda_hat(const QoISampleSet& primary,
                                       const QoISampleSet& control,
                                       const std::vector<double>& control_mean) {
  primary.validate();
  control.validate();
  check_coupling(primary, control);
  if (control_mean.size() != control.dim())
    throw argument_error("optimal_lambda_hat: control mean has wrong shape");
  const std::size_t m = primary.count(), d = primary.dim();
  if (m < 2) throw argument_error("optimal_lambda_hat: need at least two samples");

  // Both deviations are taken about the sample means. Centering the control
  // at its exact mean instead couples the estimated lambda to the realized
  // offset E_M[q~] - E[q~] and leaves an O(||offset||^3) error in the
  // combined estimator; at desk-scale M that term dominates the control
  // variate's whole benefit. The exact mean still enters the estimator
  // combination itself.
  const std::vector<double> pbar = mc_estimate(primary);
  const std::vector<double> cbar = mc_estimate(control);
  std::vector<double> lambda(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double cov = 0.0, var = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double dp = primary.rows[k][i] - pbar[i];
      const double dc = control.rows[k][i] - cbar[i];
      cov += dp * dc;
      var += dc * dc;
      scale += control.rows[k][i] * control.rows[k][i];
    }
    // Degenerate control entries fall back to plain MC.
    const double guard = 1e-24 * (scale / m + control_mean[i] * control_mean[i]);
    lambda[i] = var <= guard ? 0.0 : cov / var;
  }
  return lambda;
}

double field_lambda_hat(const QoISampleSet& primary, const QoISampleSet& control,
                        const std::vector<double>& entry_weights) {
  primary.validate();
  control.validate();
  check_coupling(primary, control);
  const std::size_t m = primary.count(), d = primary.dim();
  if (entry_weights.size() != d)
    throw argument_error("field_lambda_hat: weight shape mismatch");
  if (m < 2) throw argument_error("field_lambda_hat: need at least two samples");

  const std::vector<double> pbar = mc_estimate(primary);
  const std::vector<double> cbar = mc_estimate(control);
  double cov = 0.0, var = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      const double dp = primary.rows[k][i] - pbar[i];
      const double dc = control.rows[k][i] - cbar[i];
      cov += entry_weights[i] * dp * dc;
      var += entry_weights[i] * dc * dc;
      scale += entry_weights[i] * control.rows[k][i] * control.rows[k][i];
    }
  }
  const double guard = 1e-24 * scale / m;
  return var <= guard ? 0.0 : cov / var;
}

CvEstimate cv_estimate(const QoISampleSet& primary, const QoISampleSet& control,
                       const std::vector<double>& control_mean,
                       const std::vector<double>& lambda,
                       const std::vector<double>& entry_weights) {
  primary.validate();
  control.validate();
  check_coupling(primary, control);
  const std::size_t m = primary.count(), d = primary.dim();
  if (control_mean.size() != d || lambda.size() != d)
    throw argument_error("cv_estimate: shape mismatch");
  std::vector<double> weights = entry_weights;
  if (weights.empty()) weights.assign(d, 1.0);
  if (weights.size() != d) throw argument_error("cv_estimate: weight shape mismatch");

  const std::vector<double> pbar = mc_estimate(primary);
  const std::vector<double> cbar = mc_estimate(control);

  CvEstimate est;
  est.value.resize(d);
  est.lambda_hat = lambda;
  est.rho_hat.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    est.value[i] = pbar[i] - lambda[i] * (cbar[i] - control_mean[i]);
    double vp = 0.0, vc = 0.0, cov = 0.0, vy = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double dp = primary.rows[k][i] - pbar[i];
      const double dcs = control.rows[k][i] - cbar[i];
      vp += dp * dp;
      vc += dcs * dcs;
      cov += dp * dcs;
      const double y = dp - lambda[i] * dcs;
      vy += y * y;
    }
    const double denom = std::sqrt(vp * vc);
    est.rho_hat[i] = denom > 0.0 ? cov / denom : 0.0;
    if (m > 1) {
      est.var_mc += weights[i] * vp / (m - 1) / m;
      est.var_cv += weights[i] * vy / (m - 1) / m;
    }
  }
  return est;
}

std::uint64_t budget_max_mmf(std::uint64_t n, std::uint64_t m, std::uint64_t n_mf,
                             std::uint64_t k) {
  if (n == 0 || m == 0 || n_mf == 0 || k == 0)
    throw argument_error("budget_max_mmf: arguments must be positive");
  const unsigned __int128 total = static_cast<unsigned __int128>(k) * n * m;
  return static_cast<std::uint64_t>(total / n_mf);
}

// --- QoI plumbing -----------------------------------------------------------

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::MC: return "MC";
    case EstimatorKind::MFCVS: return "MFCV-S";
    case EstimatorKind::MFCV: return "MFCV";
  }
  return "?";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "MC" || name == "mc") return EstimatorKind::MC;
  if (name == "MFCV-S" || name == "mfcv-s" || name == "MFCVS") return EstimatorKind::MFCVS;
  if (name == "MFCV" || name == "mfcv") return EstimatorKind::MFCV;
  throw config_error("unknown estimator kind: " + name);
}

std::size_t QoiSpec::size(int n_z) const {
  switch (kind) {
    case Kind::Density: return static_cast<std::size_t>(n_z);
    case Kind::Lorenz: return static_cast<std::size_t>(points) + 1;
    default: return 1;
  }
}

std::string QoiSpec::name() const {
  switch (kind) {
    case Kind::Density: return "density";
    case Kind::Moment: return "moment:" + std::to_string(order);
    case Kind::Tail: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "tail:%g", threshold);
      return buf;
    }
    case Kind::Gini: return "gini";
    case Kind::Lorenz: return "lorenz:" + std::to_string(points);
  }
  return "?";
}

QoiSpec QoiSpec::parse(const std::string& text) {
  QoiSpec q;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "density") {
    q.kind = Kind::Density;
  } else if (head == "moment") {
    q.kind = Kind::Moment;
    q.order = arg.empty() ? 1 : std::stoi(arg);
    if (q.order < 1) throw config_error("qoi moment order must be positive");
  } else if (head == "tail") {
    q.kind = Kind::Tail;
    if (arg.empty()) throw config_error("qoi tail needs a threshold, e.g. tail:1.0");
    q.threshold = std::stod(arg);
  } else if (head == "gini") {
    q.kind = Kind::Gini;
  } else if (head == "lorenz") {
    q.kind = Kind::Lorenz;
    q.points = arg.empty() ? 100 : std::stoi(arg);
    if (q.points < 2) throw config_error("qoi lorenz needs at least 2 points");
  } else {
    throw config_error("unknown qoi: " + text);
  }
  return q;
}

namespace {

// Lorenz share at uniform population fractions j/points, linearly
// interpolated on the cumulative points (F_i, L_i).
std::vector<double> lorenz_at_targets(const std::vector<double>& F,
                                      const std::vector<double>& L, int points) {
  std::vector<double> out(points + 1);
  std::size_t i = 0;
  for (int j = 0; j <= points; ++j) {
    const double target = static_cast<double>(j) / points;
    while (i + 1 < F.size() && F[i + 1] < target) ++i;
    if (i + 1 >= F.size()) {
      out[j] = L.back();
      continue;
    }
    const double span = F[i + 1] - F[i];
    const double frac = span > 0.0 ? (target - F[i]) / span : 0.0;
    out[j] = L[i] + frac * (L[i + 1] - L[i]);
  }
  out[0] = 0.0;
  out[points] = 1.0;
  return out;
}

// Lorenz/Gini of a nonnegative mass distribution given as atoms at ascending
// positions.
struct AtomCurve {
  std::vector<double> F, L;

  AtomCurve(const std::vector<double>& pos, const std::vector<double>& mass) {
    double total_m = 0.0, total_w = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      total_m += mass[i];
      total_w += mass[i] * pos[i];
    }
    if (!(total_m > 0.0) || !(total_w > 0.0))
      throw argument_error("lorenz: distribution carries no wealth");
    F.resize(pos.size() + 1);
    L.resize(pos.size() + 1);
    F[0] = L[0] = 0.0;
    double cm = 0.0, cw = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      cm += mass[i];
      cw += mass[i] * pos[i];
      F[i + 1] = cm / total_m;
      L[i + 1] = cw / total_w;
    }
  }

  double gini() const {
    double area = 0.0;
    for (std::size_t j = 1; j < F.size(); ++j)
      area += (F[j] - F[j - 1]) * (L[j] + L[j - 1]) / 2.0;
    return 1.0 - 2.0 * area;
  }
};

}  // namespace

std::vector<double> evaluate_qoi(const ParticleEnsemble& ens, const QoiSpec& q,
                                 const Grid1D& recon) {
  switch (q.kind) {
    case QoiSpec::Kind::Density:
      return reconstruct(ens, recon).values;
    case QoiSpec::Kind::Moment:
      return {moment(ens, q.order)};
    case QoiSpec::Kind::Tail:
      return {tail_distribution(ens, q.threshold)};
    case QoiSpec::Kind::Gini:
      return {gini(lorenz_curve(ens))};
    case QoiSpec::Kind::Lorenz: {
      const LorenzCurveData curve = lorenz_curve(ens);
      return lorenz_at_targets(curve.population, curve.wealth, q.points);
    }
  }
  return {};
}

std::vector<double> evaluate_qoi_density(const std::function<double(double)>& f,
                                         const Interval& window, const QoiSpec& q,
                                         const Grid1D& recon, bool high_accuracy) {
  switch (q.kind) {
    case QoiSpec::Kind::Density: {
      std::vector<double> out(recon.n);
      for (int i = 0; i < recon.n; ++i) {
        const double cl = recon.a + i * recon.dw();
        out[i] = high_accuracy
                     ? integrate(f, cl, cl + recon.dw(), 1e-10, 1e-300) / recon.dw()
                     : cell_average(f, cl, cl + recon.dw(), 8);
      }
      return out;
    }
    case QoiSpec::Kind::Moment:
      return {integrate([&](double w) { return std::pow(w, q.order) * f(w); },
                        window.lo, window.hi, 1e-10, 1e-12)};
    case QoiSpec::Kind::Tail:
      if (q.threshold >= window.hi) return {0.0};
      return {integrate(f, std::max(q.threshold, window.lo), window.hi, 1e-10, 1e-12)};
    case QoiSpec::Kind::Gini:
    case QoiSpec::Kind::Lorenz: {
      // Fine-grained atoms over the window.
      const int fine = 4 * recon.n;
      std::vector<double> pos(fine), mass(fine);
      const double dw = window.width() / fine;
      for (int i = 0; i < fine; ++i) {
        const double cl = window.lo + i * dw;
        pos[i] = cl + 0.5 * dw;
        mass[i] = (high_accuracy ? integrate(f, cl, cl + dw, 1e-9, 1e-300)
                                 : cell_average(f, cl, cl + dw, 4) * dw);
        mass[i] = std::max(0.0, mass[i]);
      }
      AtomCurve curve(pos, mass);
      if (q.kind == QoiSpec::Kind::Gini) return {curve.gini()};
      return lorenz_at_targets(curve.F, curve.L, q.points);
    }
  }
  return {};
}

std::vector<double> evaluate_qoi_grid(const GridDensity& f, const QoiSpec& q,
                                      const Grid1D& recon) {
  switch (q.kind) {
    case QoiSpec::Kind::Density: {
      if (f.grid.n == recon.n && f.grid.a == recon.a && f.grid.b == recon.b)
        return f.values;
      std::vector<double> out(recon.n);
      for (int i = 0; i < recon.n; ++i) {
        const double cl = recon.a + i * recon.dw();
        out[i] = cell_average([&](double w) { return interp_density(f, w); }, cl,
                              cl + recon.dw(), 4);
      }
      return out;
    }
    case QoiSpec::Kind::Moment: {
      double s = 0.0;
      for (int i = 0; i < f.grid.n; ++i)
        s += std::pow(f.grid.center(i), q.order) * f.values[i];
      return {s * f.grid.dw()};
    }
    case QoiSpec::Kind::Tail:
      return {tail_distribution(f, q.threshold)};
    case QoiSpec::Kind::Gini:
    case QoiSpec::Kind::Lorenz: {
      std::vector<double> pos(f.grid.n), mass(f.grid.n);
      for (int i = 0; i < f.grid.n; ++i) {
        pos[i] = f.grid.center(i);
        mass[i] = std::max(0.0, f.values[i]) * f.grid.dw();
      }
      AtomCurve curve(pos, mass);
      if (q.kind == QoiSpec::Kind::Gini) return {curve.gini()};
      return lorenz_at_targets(curve.F, curve.L, q.points);
    }
  }
  return {};
}

// --- orchestration -----------------------------------------------------------

namespace {

std::vector<double> qoi_entry_weights(const QoiSpec& q, const Grid1D& recon) {
  std::vector<double> w(q.size(recon.n), 1.0);
  if (q.kind == QoiSpec::Kind::Density) w.assign(recon.n, recon.dw());
  if (q.kind == QoiSpec::Kind::Lorenz)
    w.assign(q.points + 1, 1.0 / (q.points + 1.0));
  return w;
}

}  // namespace

std::vector<CvEstimate> run_mfcv(const McvConfig& cfg) {
  const ModelSpec& model = cfg.model;
  if (cfg.M < 1) throw config_error("run_mfcv: M must be positive");
  if (cfg.N < 2) throw config_error("run_mfcv: N must be at least 2");
  if (!(cfg.eps > 0.0 && cfg.eps <= 1.0)) throw config_error("run_mfcv: need 0 < eps <= 1");
  if (cfg.kind == EstimatorKind::MFCVS && !model.steady)
    throw config_error("run_mfcv: model '" + model.key +
                       "' has no analytic steady state; MFCV-S unavailable");
  if (cfg.kind == EstimatorKind::MFCV) {
    if (cfg.M_MF < 2) throw config_error("run_mfcv: MFCV needs M_MF >= 2");
    const std::uint64_t bound = budget_max_mmf(cfg.N, cfg.M, cfg.N_MF, cfg.k);
    if (cfg.M_MF > bound)
      throw config_error("run_mfcv: M_MF = " + std::to_string(cfg.M_MF) +
                         " exceeds the cost bound floor(k N M / N_MF) = " +
                         std::to_string(bound));
  }

  std::vector<double> snaps = cfg.snapshot_times;
  if (snaps.empty()) snaps = {cfg.t_final};
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    if (snaps[i] > cfg.t_final + 1e-12)
      throw config_error("run_mfcv: snapshot beyond t_final");
    if (i > 0 && snaps[i] < snaps[i - 1])
      throw config_error("run_mfcv: snapshot times must be sorted");
  }
  const std::size_t n_snap = snaps.size();

  const Grid1D recon{model.window.lo, model.window.hi, cfg.N_Z};
  const Grid1D mf_grid{model.window.lo, model.window.hi, cfg.N_MF};
  const double dt_mf = cfg.k * cfg.eps;
  const std::vector<double> weights = qoi_entry_weights(cfg.qoi, recon);

  RngStream node_rng({cfg.seed, cfg.replication, 0, StreamPurpose::NodeDraw});
  const RandomNodeSet nodes = RandomNodeSet::sample(model.z_law, cfg.M, node_rng);

  // Primary DSMC sweep over the M nodes.
  std::vector<QoISampleSet> primary(n_snap);
  for (auto& set : primary) {
    set.rows.resize(cfg.M);
    set.nodes = nodes.nodes;
  }
  parallel_for(cfg.M, cfg.threads, [&](std::size_t k) {
    RngStreamSpec spec{cfg.seed, cfg.replication, static_cast<std::uint32_t>(k),
                       StreamPurpose::InitialSampling};
    const auto states =
        run_dsmc(model, cfg.N, nodes.nodes[k], cfg.eps, cfg.t_final, spec, snaps);
    for (std::size_t s = 0; s < n_snap; ++s)
      primary[s].rows[k] = evaluate_qoi(states[s], cfg.qoi, recon);
  });

  std::vector<CvEstimate> out(n_snap);

  if (cfg.kind == EstimatorKind::MC) {
    for (std::size_t s = 0; s < n_snap; ++s) {
      CvEstimate& est = out[s];
      est.kind = cfg.kind;
      est.t = snaps[s];
      est.value = mc_estimate(primary[s]);
      const std::size_t d = primary[s].dim();
      const std::size_t m = cfg.M;
      if (m > 1) {
        for (std::size_t i = 0; i < d; ++i) {
          double vp = 0.0;
          for (std::size_t k = 0; k < m; ++k) {
            const double dp = primary[s].rows[k][i] - est.value[i];
            vp += dp * dp;
          }
          est.var_mc += weights[i] * vp / (m - 1) / m;
        }
      }
      est.var_cv = est.var_mc;
      est.cost = {cfg.N, cfg.M, 0, 0, cfg.k, 0.0, 0.0};
    }
    return out;
  }

  // Control samples at the same nodes, plus the control mean.
  std::vector<QoISampleSet> control(n_snap);
  for (auto& set : control) {
    set.rows.resize(cfg.M);
    set.nodes = nodes.nodes;
  }
  std::vector<std::vector<double>> control_mean(n_snap);
  double control_mean_se = 0.0;
  double time_offset = 0.0;
  std::size_t ledger_nmf = 0, ledger_mmf = 0;

  if (cfg.kind == EstimatorKind::MFCVS) {
    auto control_field = [&](double z) {
      SteadyStateDensity steady(model.steady(z), model.domain);
      return evaluate_qoi_density([&](double w) { return steady(w); }, model.window,
                                  cfg.qoi, recon, true);
    };
    parallel_for(cfg.M, cfg.threads, [&](std::size_t k) {
      const auto row = control_field(nodes.nodes[k]);
      for (std::size_t s = 0; s < n_snap; ++s) control[s].rows[k] = row;
    });
    const CollocationRule rule =
        CollocationRule::for_uniform(cfg.collocation_nodes, model.z_law);
    const std::vector<double> mean = collocation_mean(control_field, rule);
    for (std::size_t s = 0; s < n_snap; ++s) control_mean[s] = mean;
  } else {
    // MFCV: time-dependent mean-field control.
    parallel_for(cfg.M, cfg.threads, [&](std::size_t k) {
      const auto fp =
          run_fp(model, mf_grid, nodes.nodes[k], cfg.t_final, dt_mf, snaps);
      for (std::size_t s = 0; s < n_snap; ++s)
        control[s].rows[k] = evaluate_qoi_grid(fp[s], cfg.qoi, recon);
    });
    {
      const auto probe = run_fp(model, mf_grid, nodes.nodes[0], cfg.t_final, dt_mf, snaps);
      for (std::size_t s = 0; s < n_snap; ++s)
        time_offset = std::max(time_offset, std::abs(snaps[s] - probe[s].t));
    }

    // E[q[~f^n]] over M_MF fresh i.i.d. nodes, reduced deterministically in
    // fixed chunks.
    RngStream mf_rng({cfg.seed, cfg.replication, 0, StreamPurpose::ControlNodes});
    const RandomNodeSet mf_nodes = RandomNodeSet::sample(model.z_law, cfg.M_MF, mf_rng);
    const std::size_t dim = cfg.qoi.size(cfg.N_Z);
    const std::size_t chunk = 64;
    const std::size_t n_chunks = (cfg.M_MF + chunk - 1) / chunk;
    std::vector<std::vector<double>> sums(n_chunks), sqsums(n_chunks);
    parallel_for(n_chunks, cfg.threads, [&](std::size_t c) {
      std::vector<double> sum(dim * n_snap, 0.0), sq(dim * n_snap, 0.0);
      const std::size_t lo = c * chunk, hi = std::min(cfg.M_MF, lo + chunk);
      for (std::size_t j = lo; j < hi; ++j) {
        const auto fp = run_fp(model, mf_grid, mf_nodes.nodes[j], cfg.t_final, dt_mf, snaps);
        for (std::size_t s = 0; s < n_snap; ++s) {
          const auto row = evaluate_qoi_grid(fp[s], cfg.qoi, recon);
          for (std::size_t i = 0; i < dim; ++i) {
            sum[s * dim + i] += row[i];
            sq[s * dim + i] += row[i] * row[i];
          }
        }
      }
      sums[c] = std::move(sum);
      sqsums[c] = std::move(sq);
    });
    for (std::size_t s = 0; s < n_snap; ++s) control_mean[s].assign(dim, 0.0);
    std::vector<double> total_sq(dim * n_snap, 0.0);
    for (std::size_t c = 0; c < n_chunks; ++c)
      for (std::size_t s = 0; s < n_snap; ++s)
        for (std::size_t i = 0; i < dim; ++i) {
          control_mean[s][i] += sums[c][s * dim + i];
          total_sq[s * dim + i] += sqsums[c][s * dim + i];
        }
    double se2 = 0.0;
    for (std::size_t s = 0; s < n_snap; ++s)
      for (std::size_t i = 0; i < dim; ++i) {
        control_mean[s][i] /= static_cast<double>(cfg.M_MF);
        const double var =
            std::max(0.0, total_sq[s * dim + i] / cfg.M_MF -
                              control_mean[s][i] * control_mean[s][i]);
        se2 += weights[i] * var / static_cast<double>(cfg.M_MF);
      }
    control_mean_se = std::sqrt(se2 / n_snap);
    ledger_nmf = static_cast<std::size_t>(cfg.N_MF);
    ledger_mmf = cfg.M_MF;
  }

  const bool field_qoi =
      cfg.qoi.kind == QoiSpec::Kind::Density || cfg.qoi.kind == QoiSpec::Kind::Lorenz;
  for (std::size_t s = 0; s < n_snap; ++s) {
    std::vector<double> lambda;
    if (field_qoi) {
      lambda.assign(cfg.qoi.size(cfg.N_Z),
                    field_lambda_hat(primary[s], control[s], weights));
    } else {
      lambda = optimal_lambda_hat(primary[s], control[s], control_mean[s]);
    }
    out[s] = cv_estimate(primary[s], control[s], control_mean[s], lambda, weights);
    out[s].kind = cfg.kind;
    out[s].t = snaps[s];
    out[s].cost = {cfg.N,      cfg.M, ledger_nmf,     ledger_mmf,
                   cfg.k,      control_mean_se, time_offset};
  }
  return out;
}

}  // namespace kuq
