#include "kuq/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kuq/quadrature.hpp"

namespace kuq {

// --- steady states ----------------------------------------------------------

namespace {

double log_or_skip(double exponent, double base) {
  // exponent * log(base) with the 0 * log(0) corner defined as 0.
  if (exponent == 0.0) return 0.0;
  if (base <= 0.0) return -kInf;
  return exponent * std::log(base);
}

}  // namespace

SteadyStateDensity::SteadyStateDensity(const SteadyStateParams& params, Interval support)
    : params_(params), support_(support) {
  params_.validate();
  switch (params_.family) {
    case SteadyFamily::Beta: {
      const double alpha = params_.strength * (1.0 + params_.mean) / params_.sigma2;
      const double beta = params_.strength * (1.0 - params_.mean) / params_.sigma2;
      const double lbeta =
          std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
      log_norm_ = -((alpha + beta - 1.0) * std::log(2.0) + lbeta);
      break;
    }
    case SteadyFamily::InverseGamma: {
      const double mu = params_.mu();
      const double scale = (mu - 1.0) * params_.mean;
      log_norm_ = mu * std::log(scale) - std::lgamma(mu);
      break;
    }
    case SteadyFamily::MaxwellianLike: {
      // Shape known up to a constant; normalize by quadrature with a shift
      // against overflow.
      auto shape = [&](double w) { return log_density_shape(w); };
      double shift = -kInf;
      for (int i = 1; i < 1024; ++i)
        shift = std::max(shift, shape(-1.0 + 2.0 * i / 1024.0));
      const double integral = integrate(
          [&](double w) {
            const double l = shape(w);
            return std::isfinite(l) ? std::exp(l - shift) : 0.0;
          },
          -1.0, 1.0, 1e-10, 1e-300);
      if (!(integral > 0.0) || !std::isfinite(integral))
        throw numeric_error("SteadyStateDensity: normalization quadrature failed");
      log_norm_ = -(std::log(integral) + shift);
      break;
    }
  }
}

double SteadyStateDensity::log_density_shape(double w) const {
  switch (params_.family) {
    case SteadyFamily::Beta: {
      const double alpha = params_.strength * (1.0 + params_.mean) / params_.sigma2;
      const double beta = params_.strength * (1.0 - params_.mean) / params_.sigma2;
      return log_or_skip(alpha - 1.0, 1.0 + w) + log_or_skip(beta - 1.0, 1.0 - w);
    }
    case SteadyFamily::InverseGamma: {
      if (w <= 0.0) return -kInf;
      const double mu = params_.mu();
      const double scale = (mu - 1.0) * params_.mean;
      return -(1.0 + mu) * std::log(w) - scale / w;
    }
    case SteadyFamily::MaxwellianLike: {
      const double u = 1.0 - w * w;
      if (u <= 0.0) return -kInf;
      const double kappa = params_.strength * params_.mean / (2.0 * params_.sigma2);
      return log_or_skip(-2.0 + kappa, 1.0 + w) + log_or_skip(-2.0 - kappa, 1.0 - w) -
             params_.strength * (1.0 - params_.mean * w) / (params_.sigma2 * u);
    }
  }
  return -kInf;
}

double SteadyStateDensity::log_density(double w) const {
  if (!support_.contains(w)) return -kInf;
  return log_norm_ + log_density_shape(w);
}

double SteadyStateDensity::operator()(double w) const {
  const double l = log_density(w);
  return std::isfinite(l) ? std::exp(l) : 0.0;
}

double steady_state_density(const SteadyStateParams& params, double w) {
  const Interval support = params.family == SteadyFamily::InverseGamma
                               ? Interval{0.0, kInf}
                               : Interval{-1.0, 1.0};
  return SteadyStateDensity(params, support)(w);
}

// --- nonlocal drift ----------------------------------------------------------

DriftField::DriftField(const GridDensity& density, const ModelSpec& model)
    : linear_(!model.coeffs.depends_on_state()),
      density_(&density),
      model_(&model) {
  if (linear_) {
    // P(v, w) = A w + B v with coefficients constant in (v, w):
    // B(w) = A m0 w + B m1 in the discrete moments of the density.
    const double z = density.z;
    const auto& c = model.coeffs;
    const double A = 0.5 * (c.p1(0.0, z) + c.q2(0.0, z) - 2.0);
    const double B = 0.5 * (c.p2(0.0, z) + c.q1(0.0, z));
    double m0 = 0.0, m1 = 0.0;
    for (int i = 0; i < density.grid.n; ++i) {
      m0 += density.values[i];
      m1 += density.grid.center(i) * density.values[i];
    }
    m0 *= density.grid.dw();
    m1 *= density.grid.dw();
    affine_a_ = B * m1;
    affine_b_ = A * m0;
  }
}

double DriftField::operator()(double w) const {
  if (linear_) return affine_a_ + affine_b_ * w;
  // 2-point Gauss per cell against the piecewise-constant density.
  const GridDensity& f = *density_;
  const double z = f.z;
  const double h = 0.5 * f.grid.dw() / std::sqrt(3.0);
  double sum = 0.0;
  for (int j = 0; j < f.grid.n; ++j) {
    if (f.values[j] == 0.0) continue;
    const double vc = f.grid.center(j);
    sum += 0.5 * (drift_kernel(vc - h, w, z, *model_) + drift_kernel(vc + h, w, z, *model_)) *
           f.values[j];
  }
  return sum * f.grid.dw();
}

std::vector<double> assemble_drift(const GridDensity& density, const ModelSpec& model) {
  density.grid.validate();
  DriftField b(density, model);
  std::vector<double> out(density.grid.n - 1);
  for (int i = 0; i < density.grid.n - 1; ++i) out[i] = b(density.grid.iface(i));
  return out;
}

// --- structure-preserving step ----------------------------------------------

namespace {

// lambda / (exp(lambda) - 1), stable across the full range.
double g_minus(double lam) {
  if (std::abs(lam) < 1e-6) return 1.0 - 0.5 * lam + lam * lam / 12.0;
  const double e = std::expm1(lam);
  if (std::isinf(e)) return lam * std::exp(-lam);
  return lam / e;
}

double g_plus(double lam) { return g_minus(-lam); }

struct FluxCoefficients {
  std::vector<double> a;  // F_{i+1/2} = a_i f_i + b_i f_{i+1}
  std::vector<double> b;
};

// Exponential-fitting flux coefficients: lambda_{i+1/2} is the integral of
// the drift-to-diffusion ratio over [w_i, w_{i+1}], so the discrete steady
// state reproduces the analytic one on the cell centers.
FluxCoefficients assemble_flux(const GridDensity& f, const ModelSpec& model) {
  const Grid1D& grid = f.grid;
  const int n = grid.n;
  const double dw = grid.dw();
  const double z = f.z;
  const double half_s2 = 0.5 * model.noise.sigma2;
  DriftField drift(f, model);

  auto ratio = [&](double w) {
    const double diff = half_s2 * model.diffusion.d_sq(w, z);
    if (!(diff > 0.0))
      throw numeric_error("fp_step: diffusion vanishes inside the domain");
    return (-drift(w) + half_s2 * model.diffusion.d_sq_prime(w, z)) / diff;
  };

  const bool cheap = !model.coeffs.depends_on_state();
  static const QuadratureRule g6 = gauss_legendre(6);

  FluxCoefficients cf;
  cf.a.resize(n - 1);
  cf.b.resize(n - 1);
  for (int i = 0; i < n - 1; ++i) {
    const double wl = grid.center(i), wr = grid.center(i + 1);
    double lam;
    if (cheap) {
      lam = integrate(ratio, wl, wr, 1e-12, 1e-15);
    } else {
      const double c = 0.5 * (wl + wr), h = 0.5 * (wr - wl);
      lam = 0.0;
      for (std::size_t q = 0; q < g6.nodes.size(); ++q)
        lam += g6.weights[q] * ratio(c + h * g6.nodes[q]);
      lam *= h;
    }
    const double diff = half_s2 * model.diffusion.d_sq(grid.iface(i), z) / dw;
    cf.a[i] = -diff * g_minus(lam);
    cf.b[i] = diff * g_plus(lam);
  }
  return cf;
}

}  // namespace

FpStepStats fp_step(GridDensity& f, double dt, const ModelSpec& model) {
  if (!(dt > 0.0)) throw argument_error("fp_step: dt must be positive");
  f.grid.validate();
  const int n = f.grid.n;
  const double r = dt / f.grid.dw();
  const FluxCoefficients cf = assemble_flux(f, model);

  // Backward Euler: (I - r * divF) f^{n+1} = f^n. The matrix is an M-matrix
  // with unit column sums, so the solve conserves mass and positivity.
  static thread_local std::vector<double> diag, upper, lower, rhs;
  diag.assign(n, 1.0);
  upper.assign(n, 0.0);
  lower.assign(n, 0.0);
  rhs = f.values;
  for (int i = 0; i < n; ++i) {
    if (i < n - 1) {
      diag[i] -= r * cf.a[i];
      upper[i] = -r * cf.b[i];
    }
    if (i > 0) {
      diag[i] += r * cf.b[i - 1];
      lower[i] = r * cf.a[i - 1];
    }
  }

  // Thomas solve.
  for (int i = 1; i < n; ++i) {
    if (diag[i - 1] == 0.0) throw numeric_error("fp_step: tridiagonal solve failed");
    const double m = lower[i] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  if (diag[n - 1] == 0.0) throw numeric_error("fp_step: tridiagonal solve failed");
  f.values[n - 1] = rhs[n - 1] / diag[n - 1];
  for (int i = n - 2; i >= 0; --i)
    f.values[i] = (rhs[i] - upper[i] * f.values[i + 1]) / diag[i];

  FpStepStats stats;
  for (auto& v : f.values) {
    if (v < 0.0) {
      if (v < -1e-13)
        throw invariant_error("fp_step: negative density beyond roundoff");
      stats.mass_correction -= v * f.grid.dw();
      v = 0.0;
    }
  }
  f.t += dt;
  return stats;
}

// --- projections and marching -------------------------------------------------

GridDensity project_initial(const ModelSpec& model, const Grid1D& grid, double z) {
  grid.validate();
  GridDensity f;
  f.grid = grid;
  f.z = z;
  f.t = 0.0;
  f.values.resize(grid.n);
  if (model.init.kind == InitialCondition::Kind::UniformInterval) {
    const double lo = model.init.lo(z), hi = model.init.hi(z);
    const double h = 1.0 / (hi - lo);
    for (int i = 0; i < grid.n; ++i) {
      const double cl = grid.a + i * grid.dw(), cr = cl + grid.dw();
      const double overlap = std::max(0.0, std::min(cr, hi) - std::max(cl, lo));
      f.values[i] = h * overlap / grid.dw();
    }
  } else {
    for (int i = 0; i < grid.n; ++i) {
      const double cl = grid.a + i * grid.dw(), cr = cl + grid.dw();
      f.values[i] = cell_average([&](double w) { return model.init.density(w, z); },
                                 cl, cr, 8);
    }
  }
  const double mass = f.mass();
  if (!(mass > 0.0)) throw numeric_error("project_initial: projected density has no mass");
  for (auto& v : f.values) v /= mass;
  return f;
}

GridDensity project_cell_centers(const std::function<double(double)>& fn,
                                 const Grid1D& grid, double z) {
  grid.validate();
  GridDensity f;
  f.grid = grid;
  f.z = z;
  f.values.resize(grid.n);
  for (int i = 0; i < grid.n; ++i) f.values[i] = fn(grid.center(i));
  const double mass = f.mass();
  if (!(mass > 0.0)) throw numeric_error("project_cell_centers: no mass on the grid");
  for (auto& v : f.values) v /= mass;
  return f;
}

GridDensity project_cell_averages(const std::function<double(double)>& fn,
                                  const Grid1D& grid, double z) {
  grid.validate();
  GridDensity f;
  f.grid = grid;
  f.z = z;
  f.values.resize(grid.n);
  for (int i = 0; i < grid.n; ++i) {
    const double cl = grid.a + i * grid.dw();
    f.values[i] = integrate(fn, cl, cl + grid.dw(), 1e-10, 1e-300) / grid.dw();
  }
  return f;
}

double interp_density(const GridDensity& f, double w) {
  const Grid1D& g = f.grid;
  if (w <= g.center(0)) return f.values.front();
  if (w >= g.center(g.n - 1)) return f.values.back();
  const double s = (w - g.center(0)) / g.dw();
  const int i = std::min(g.n - 2, static_cast<int>(s));
  const double frac = s - i;
  return (1.0 - frac) * f.values[i] + frac * f.values[i + 1];
}

double suggest_dt(const ModelSpec& model, const Grid1D& grid, double z) {
  const GridDensity f = project_initial(model, grid, z);
  DriftField drift(f, model);
  double cmax = 0.0;
  for (int i = 0; i < grid.n - 1; ++i) {
    const double w = grid.iface(i);
    const double c = -drift(w) + 0.5 * model.noise.sigma2 * model.diffusion.d_sq_prime(w, z);
    cmax = std::max(cmax, std::abs(c));
  }
  if (cmax == 0.0) return grid.dw();
  return grid.dw() / cmax;
}

std::vector<GridDensity> run_fp_from(GridDensity f, const ModelSpec& model,
                                     double t_final, double dt,
                                     const std::vector<double>& snapshot_times) {
  if (t_final < f.t - 1e-12) throw argument_error("run_fp: t_final before current time");
  std::vector<GridDensity> out;
  const double t0 = f.t;
  const auto n_steps = static_cast<std::uint64_t>(std::ceil((t_final - t0) / dt - 1e-12));
  std::vector<std::uint64_t> snap_steps;
  for (double s : snapshot_times) {
    if (s > t_final + 1e-12) throw argument_error("run_fp: snapshot beyond t_final");
    // Control snapshots use the most recent step at or before the time.
    auto idx = static_cast<std::uint64_t>(std::floor((s - t0) / dt + 1e-9));
    snap_steps.push_back(std::min(idx, n_steps));
  }
  std::size_t next = 0;
  while (next < snap_steps.size() && snap_steps[next] == 0) {
    out.push_back(f);
    ++next;
  }
  for (std::uint64_t step = 1; step <= n_steps; ++step) {
    fp_step(f, dt, model);
    f.t = t0 + static_cast<double>(step) * dt;
    while (next < snap_steps.size() && snap_steps[next] == step) {
      out.push_back(f);
      ++next;
    }
  }
  if (snapshot_times.empty()) out.push_back(f);
  return out;
}

std::vector<GridDensity> run_fp(const ModelSpec& model, const Grid1D& grid, double z,
                                double t_final, double dt,
                                const std::vector<double>& snapshot_times) {
  return run_fp_from(project_initial(model, grid, z), model, t_final, dt, snapshot_times);
}

void write_density_csv(const GridDensity& f, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw numeric_error("write_density_csv: cannot open " + path);
  std::fprintf(fp, "w,f\n");
  for (int i = 0; i < f.grid.n; ++i)
    std::fprintf(fp, "%.17g,%.17g\n", f.grid.center(i), f.values[i]);
  std::fclose(fp);
}

}  // namespace kuq
