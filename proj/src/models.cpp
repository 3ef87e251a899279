#include "kuq/models.hpp"

#include <algorithm>
#include <cmath>

#include "kuq/quadrature.hpp"

namespace kuq {

bool InteractionCoefficients::check_mean_conserving(const UncertaintyLaw& law,
                                                    double tol) const {
  const bool state_dep = depends_on_state();
  for (int iz = 0; iz <= 32; ++iz) {
    const double z = law.lo + (law.hi - law.lo) * iz / 32.0;
    const int ns = state_dep ? 16 : 1;
    for (int is = 0; is <= ns; ++is) {
      const double s = 2.0 * is / ns;
      if (std::abs(p1(s, z) + p2(s, z) - 1.0) > tol) return false;
      if (std::abs(q1(s, z) + q2(s, z) - 1.0) > tol) return false;
    }
  }
  return true;
}

InteractionCoefficients InteractionCoefficients::symmetric_compromise(const CoeffFn& p) {
  InteractionCoefficients c;
  c.p2 = p;
  c.q1 = p;
  switch (p.kind) {
    case CoeffFn::Kind::Constant:
      c.p1 = CoeffFn::constant(1.0 - p.c0);
      break;
    case CoeffFn::Kind::AffineZ:
      c.p1 = CoeffFn::affine_z(1.0 - p.c0, -p.c1);
      break;
    case CoeffFn::Kind::IndicatorBelowZ:
      c.p1 = {CoeffFn::Kind::OneMinusIndicatorBelowZ, 0.0, 0.0, nullptr};
      break;
    case CoeffFn::Kind::OneMinusIndicatorBelowZ:
      c.p1 = {CoeffFn::Kind::IndicatorBelowZ, 0.0, 0.0, nullptr};
      break;
    case CoeffFn::Kind::Custom:
      c.p1 = {CoeffFn::Kind::Custom, 0.0, 0.0,
              [f = p.fn](double s, double z) { return 1.0 - f(s, z); }};
      break;
  }
  c.q2 = c.p1;
  c.mean_conserving = true;
  return c;
}

void SteadyStateParams::validate() const {
  if (sigma2 <= 0.0) throw argument_error("SteadyStateParams: sigma2 must be positive");
  switch (family) {
    case SteadyFamily::Beta:
      if (!(std::abs(mean) < 1.0))
        throw argument_error("SteadyStateParams: beta family requires |m| < 1");
      break;
    case SteadyFamily::InverseGamma:
      if (!(mu() > 1.0))
        throw argument_error("SteadyStateParams: inverse-gamma requires mu > 1");
      if (!(mean > 0.0))
        throw argument_error("SteadyStateParams: inverse-gamma requires m > 0");
      break;
    case SteadyFamily::MaxwellianLike:
      if (!(std::abs(mean) < 1.0))
        throw argument_error("SteadyStateParams: maxwellian-like requires |m| < 1");
      break;
  }
}

void ModelSpec::validate() const {
  z_law.validate();
  if (!(domain.lo < domain.hi)) throw config_error("ModelSpec: empty domain");
  if (!coeffs.check_mean_conserving(z_law) && coeffs.mean_conserving)
    throw config_error("ModelSpec: mean-conserving flag contradicts coefficients");
  // D >= 0 and unit initial mass, probed on a few z values.
  for (int iz = 0; iz <= 4; ++iz) {
    const double z = z_law.lo + (z_law.hi - z_law.lo) * iz / 4.0;
    for (int iw = 0; iw <= 64; ++iw) {
      const double w = window.lo + window.width() * iw / 64.0;
      if (diffusion.d(w, z) < 0.0)
        throw config_error("ModelSpec: diffusion D(w,z) must be nonnegative on V");
    }
    if (init.kind == InitialCondition::Kind::UniformInterval) {
      if (!(domain.contains(init.lo(z)) && domain.contains(init.hi(z))))
        throw config_error("ModelSpec: initial interval leaves the domain");
      continue;  // normalized by construction
    }
    const double mass = integrate([&](double w) { return init.density(w, z); },
                                  window.lo, window.hi, 1e-10, 1e-12);
    if (mass <= 0.0) throw config_error("ModelSpec: initial density has no mass");
  }
}

double drift_kernel(double v, double w, double z, const ModelSpec& model) {
  if (!model.domain.contains(v) || !model.domain.contains(w))
    throw argument_error("drift_kernel: state outside the domain");
  const double s = std::abs(v - w);
  const auto& c = model.coeffs;
  return 0.5 * ((c.p1(s, z) + c.q2(s, z) - 2.0) * w + (c.p2(s, z) + c.q1(s, z)) * v);
}

InteractionResult apply_interaction(double v, double w, double z, double eta_v,
                                    double eta_w, double eps, const ModelSpec& model) {
  if (!(eps > 0.0 && eps <= 1.0)) throw argument_error("apply_interaction: need 0 < eps <= 1");
  if (!model.domain.contains(v) || !model.domain.contains(w))
    throw argument_error("apply_interaction: state outside the domain");
  const double s = std::abs(v - w);
  const auto& c = model.coeffs;
  double vp = v + eps * ((c.p1(s, z) - 1.0) * v + c.q1(s, z) * w) +
              model.diffusion.d(v, z) * eta_v;
  double wp = w + eps * (c.p2(s, z) * v + (c.q2(s, z) - 1.0) * w) +
              model.diffusion.d(w, z) * eta_w;

  // Exact arithmetic keeps admissible updates inside V; floating point can
  // round a boundary-touching state out by a few ulp. Snap those and count
  // them; anything larger is a genuine noise-bound violation.
  InteractionResult out{vp, wp, 0};
  const double scale = 1.0 + std::abs(v) + std::abs(w) + std::abs(vp) + std::abs(wp);
  const double snap_tol = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  for (double* x : {&out.v, &out.w}) {
    if (*x < model.domain.lo) {
      if (model.domain.lo - *x > snap_tol)
        throw invariant_error("apply_interaction: post state left the domain (noise bound violated)");
      *x = model.domain.lo;
      ++out.boundary_snaps;
    } else if (*x > model.domain.hi) {
      if (*x - model.domain.hi > snap_tol)
        throw invariant_error("apply_interaction: post state left the domain (noise bound violated)");
      *x = model.domain.hi;
      ++out.boundary_snaps;
    }
  }
  return out;
}

namespace {

double single_state_bound(double w, double s, double eps, const ModelSpec& model) {
  // Worst case over the partner state, uniform over z.
  const double pmax =
      std::min(1.0, std::max(model.coeffs.p2.max_over_z(s, model.z_law),
                             model.coeffs.q1.max_over_z(s, model.z_law)));
  const double margin = 1.0 - eps * pmax;
  switch (model.diffusion.form) {
    case DiffusionSpec::Form::Linear:
      // Wealth rule: v' >= v (1 - eps lambda + eta) >= 0 for |eta| <= 1 - eps.
      return 1.0 - eps;
    case DiffusionSpec::Form::Parabola:
      return std::max(0.0, margin) / (1.0 + std::abs(w));
    case DiffusionSpec::Form::SqrtParabola: {
      const double aw = std::min(1.0, std::abs(w));
      return std::max(0.0, margin) * std::sqrt((1.0 - aw) / (1.0 + aw));
    }
    case DiffusionSpec::Form::Custom:
      return 0.0;
  }
  return 0.0;
}

}  // namespace

double admissible_noise_bound(double v, double w, double z, double eps,
                              const ModelSpec& model) {
  (void)z;  // bounds are uniform in z by construction
  if (!model.domain.contains(v) || !model.domain.contains(w))
    throw argument_error("admissible_noise_bound: state outside the domain");
  const double s = std::abs(v - w);
  return std::min(single_state_bound(v, s, eps, model),
                  single_state_bound(w, s, eps, model));
}

NoiseDraw sample_noise(double bound, double eps, const ModelSpec& model, RngStream& rng) {
  if (bound < 0.0) throw argument_error("sample_noise: bound must be nonnegative");
  const double target = std::sqrt(3.0 * eps * model.noise.sigma2);
  const double b = std::min(target, bound);
  NoiseDraw draw;
  draw.eta = b == 0.0 ? 0.0 : rng.uniform(-b, b);
  draw.variance_deficit = b < target ? eps * model.noise.sigma2 - b * b / 3.0 : 0.0;
  return draw;
}

// --- catalog ---------------------------------------------------------------

namespace {

ModelSpec base_opinion() {
  ModelSpec m;
  m.domain = {-1.0, 1.0};
  m.window = {-1.0, 1.0};
  return m;
}

}  // namespace

std::vector<std::string> catalog_keys() {
  return {"opinion-A", "opinion-B", "wealth-A", "wealth-B", "bounded-confidence"};
}

std::string model_description(const std::string& key) {
  if (key == "opinion-A")
    return "opinion formation, p = 1, D = sqrt(1-w^2), uncertain initial data, beta steady state";
  if (key == "opinion-B")
    return "opinion formation, p(z) = 3/4 + z/4, D = 1-w^2, maxwellian-like steady state";
  if (key == "wealth-A")
    return "wealth exchange, lambda = 1, D = w, uncertain initial data, inverse-gamma steady state";
  if (key == "wealth-B")
    return "wealth exchange, lambda(z) = 1/2 + z/4, D = w, inverse-gamma steady state";
  if (key == "bounded-confidence")
    return "bounded-confidence opinion model, p = chi(|v-w| < z), D = 1-w^2, double-Gaussian start";
  throw config_error("unknown model key: " + key);
}

ModelSpec make_model(const std::string& key) {
  ModelSpec m;
  if (key == "opinion-A") {
    m = base_opinion();
    m.coeffs = InteractionCoefficients::symmetric_compromise(CoeffFn::constant(1.0));
    m.diffusion.form = DiffusionSpec::Form::SqrtParabola;
    m.noise.sigma2 = 0.006;
    m.z_law = {1, 0.0, 1.0};
    m.init = {InitialCondition::Kind::UniformInterval, -0.5, 0.25, 0.5, 0.25, 30.0, 0.5, nullptr};
    m.steady = [s2 = m.noise.sigma2](double z) {
      return SteadyStateParams{SteadyFamily::Beta, z / 4.0, s2, 1.0};
    };
  } else if (key == "opinion-B") {
    m = base_opinion();
    m.coeffs = InteractionCoefficients::symmetric_compromise(CoeffFn::affine_z(0.75, 0.25));
    m.diffusion.form = DiffusionSpec::Form::Parabola;
    m.noise.sigma2 = 0.1;
    m.z_law = {1, -1.0, 1.0};
    m.init = {InitialCondition::Kind::UniformInterval, -0.5, 0.0, 0.5, 0.0, 30.0, 0.5, nullptr};
    m.steady = [s2 = m.noise.sigma2](double z) {
      return SteadyStateParams{SteadyFamily::MaxwellianLike, 0.0, s2, 0.75 + 0.25 * z};
    };
  } else if (key == "wealth-A") {
    m.domain = {0.0, kInf};
    m.window = {1e-6, 10.0};
    m.coeffs = InteractionCoefficients::symmetric_compromise(CoeffFn::constant(1.0));
    m.diffusion.form = DiffusionSpec::Form::Linear;
    m.noise.sigma2 = 0.1;
    m.z_law = {1, 0.0, 1.0};
    m.init = {InitialCondition::Kind::UniformInterval, 0.0, 0.2, 2.0, 0.2, 30.0, 0.5, nullptr};
    m.steady = [s2 = m.noise.sigma2](double z) {
      return SteadyStateParams{SteadyFamily::InverseGamma, 1.0 + z / 5.0, s2, 1.0};
    };
  } else if (key == "wealth-B") {
    m.domain = {0.0, kInf};
    m.window = {1e-6, 10.0};
    m.coeffs = InteractionCoefficients::symmetric_compromise(CoeffFn::affine_z(0.5, 0.25));
    m.diffusion.form = DiffusionSpec::Form::Linear;
    m.noise.sigma2 = 0.1;
    m.z_law = {1, -1.0, 1.0};
    m.init = {InitialCondition::Kind::UniformInterval, 0.0, 0.0, 2.0, 0.0, 30.0, 0.5, nullptr};
    m.steady = [s2 = m.noise.sigma2](double z) {
      return SteadyStateParams{SteadyFamily::InverseGamma, 1.0, s2, 0.5 + 0.25 * z};
    };
  } else if (key == "bounded-confidence") {
    m = base_opinion();
    m.coeffs = InteractionCoefficients::symmetric_compromise(
        {CoeffFn::Kind::IndicatorBelowZ, 0.0, 0.0, nullptr});
    m.diffusion.form = DiffusionSpec::Form::Parabola;
    m.noise.sigma2 = 0.1;
    m.z_law = {1, 1.0, 2.0};
    m.init.kind = InitialCondition::Kind::DoubleGaussian;
    m.init.stiffness = 30.0;
    m.init.center = 0.5;
    // steady state unknown; no MFCV-S for this model
  } else {
    throw config_error("unknown model key: " + key);
  }
  m.key = key;
  return m;
}

}  // namespace kuq
