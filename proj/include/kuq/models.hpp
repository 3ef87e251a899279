#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kuq/common.hpp"
#include "kuq/rng.hpp"

namespace kuq {

// Law of the uncertain parameter z. All catalog scenarios use a scalar
// uniform law; dimension is kept explicit for the data contract.
struct UncertaintyLaw {
  int dimension{1};
  double lo{0.0};
  double hi{1.0};

  double sample(RngStream& rng) const { return rng.uniform(lo, hi); }
  bool contains(double z) const { return z >= lo && z <= hi; }
  void validate() const {
    if (dimension != 1) throw config_error("UncertaintyLaw: only d_z = 1 is supported");
    if (!(lo < hi)) throw config_error("UncertaintyLaw: support lower bound must be < upper bound");
  }
};

// One interaction coefficient, a function of the pair distance s = |v-w|
// and of z. Catalog models use the closed forms; Custom takes a callable.
struct CoeffFn {
  enum class Kind { Constant, AffineZ, IndicatorBelowZ, OneMinusIndicatorBelowZ, Custom };

  Kind kind{Kind::Constant};
  double c0{0.0};
  double c1{0.0};
  std::function<double(double s, double z)> fn;

  double operator()(double s, double z) const {
    switch (kind) {
      case Kind::Constant: return c0;
      case Kind::AffineZ: return c0 + c1 * z;
      case Kind::IndicatorBelowZ: return s < z ? 1.0 : 0.0;
      case Kind::OneMinusIndicatorBelowZ: return s < z ? 0.0 : 1.0;
      case Kind::Custom: return fn(s, z);
    }
    return 0.0;
  }

  bool depends_on_state() const {
    return kind == Kind::IndicatorBelowZ || kind == Kind::OneMinusIndicatorBelowZ ||
           kind == Kind::Custom;
  }

  double max_over_z(double s, const UncertaintyLaw& law) const {
    switch (kind) {
      case Kind::Constant: return c0;
      case Kind::AffineZ: return std::max(c0 + c1 * law.lo, c0 + c1 * law.hi);
      case Kind::IndicatorBelowZ: return s < law.hi ? 1.0 : 0.0;
      case Kind::OneMinusIndicatorBelowZ: return s < law.lo ? 0.0 : 1.0;
      case Kind::Custom: {
        double m = fn(s, law.lo);
        for (int i = 1; i <= 16; ++i)
          m = std::max(m, fn(s, law.lo + (law.hi - law.lo) * i / 16.0));
        return m;
      }
    }
    return 0.0;
  }

  static CoeffFn constant(double c) { return {Kind::Constant, c, 0.0, nullptr}; }
  static CoeffFn affine_z(double a, double b) { return {Kind::AffineZ, a, b, nullptr}; }
};

// The four mixing coefficients of the binary rule.
struct InteractionCoefficients {
  CoeffFn p1, p2, q1, q2;
  bool mean_conserving{false};

  bool depends_on_state() const {
    return p1.depends_on_state() || p2.depends_on_state() || q1.depends_on_state() ||
           q2.depends_on_state();
  }

  // Numeric check of p1+p2 = 1 and q1+q2 = 1 on sampled z (and s probes when
  // the coefficients are state dependent).
  bool check_mean_conserving(const UncertaintyLaw& law, double tol = 1e-12) const;

  // Symmetric compromise rule: p1 = q2 = 1-p, p2 = q1 = p.
  static InteractionCoefficients symmetric_compromise(const CoeffFn& p);
};

// Local diffusion strength D(w, z) >= 0.
struct DiffusionSpec {
  enum class Form { SqrtParabola, Parabola, Linear, Custom };

  Form form{Form::SqrtParabola};
  std::function<double(double w, double z)> custom;        // D
  std::function<double(double w, double z)> custom_d2p;    // d/dw of D^2, optional

  double d(double w, double z) const {
    switch (form) {
      case Form::SqrtParabola: return std::sqrt(std::max(0.0, 1.0 - w * w));
      case Form::Parabola: return 1.0 - w * w;
      case Form::Linear: return w;
      case Form::Custom: return custom(w, z);
    }
    return 0.0;
  }

  double d_sq(double w, double z) const {
    switch (form) {
      case Form::SqrtParabola: return 1.0 - w * w;
      case Form::Parabola: {
        const double u = 1.0 - w * w;
        return u * u;
      }
      case Form::Linear: return w * w;
      case Form::Custom: {
        const double v = custom(w, z);
        return v * v;
      }
    }
    return 0.0;
  }

  double d_sq_prime(double w, double z) const {
    switch (form) {
      case Form::SqrtParabola: return -2.0 * w;
      case Form::Parabola: return -4.0 * w * (1.0 - w * w);
      case Form::Linear: return 2.0 * w;
      case Form::Custom: {
        if (custom_d2p) return custom_d2p(w, z);
        const double h = 1e-6;
        return (d_sq(w + h, z) - d_sq(w - h, z)) / (2.0 * h);
      }
    }
    return 0.0;
  }
};

// Unscaled noise variance; the realized interaction noise has variance
// eps * sigma2 (before admissibility truncation).
struct NoiseSpec {
  double sigma2{0.1};
};

struct InitialCondition {
  enum class Kind { UniformInterval, DoubleGaussian, CustomDensity };

  Kind kind{Kind::UniformInterval};
  // UniformInterval: endpoints lo0 + lo1*z, hi0 + hi1*z.
  double lo0{-0.5}, lo1{0.0}, hi0{0.5}, hi1{0.0};
  // DoubleGaussian: C exp(-stiffness (w-center)^2) + C exp(-stiffness (w+center)^2).
  double stiffness{30.0}, center{0.5};
  std::function<double(double w, double z)> custom;  // unnormalized density

  double lo(double z) const { return lo0 + lo1 * z; }
  double hi(double z) const { return hi0 + hi1 * z; }

  // Unnormalized density; UniformInterval is normalized by construction.
  double density(double w, double z) const {
    switch (kind) {
      case Kind::UniformInterval:
        return (w >= lo(z) && w <= hi(z)) ? 1.0 / (hi(z) - lo(z)) : 0.0;
      case Kind::DoubleGaussian: {
        const double a = w - center, b = w + center;
        return std::exp(-stiffness * a * a) + std::exp(-stiffness * b * b);
      }
      case Kind::CustomDensity: return custom(w, z);
    }
    return 0.0;
  }
};

// Steady-state family of the mean-field limit, when known in closed form.
enum class SteadyFamily { MaxwellianLike, Beta, InverseGamma };

struct SteadyStateParams {
  SteadyFamily family{SteadyFamily::Beta};
  double mean{0.0};       // conserved mean m(z)
  double sigma2{0.1};     // noise variance of the mean-field model
  double strength{1.0};   // interaction strength p(z) or lambda(z)

  double mu() const { return 1.0 + 2.0 * strength / sigma2; }  // inverse-gamma exponent
  void validate() const;
};

struct ModelSpec {
  std::string key;
  Interval domain{-1.0, 1.0};   // state space V; hi may be +inf
  Interval window{-1.0, 1.0};   // reconstruction / grid window (truncates half lines)
  InteractionCoefficients coeffs;
  DiffusionSpec diffusion;
  NoiseSpec noise;
  UncertaintyLaw z_law;
  InitialCondition init;
  // Steady-state parameters as a function of z, when the family is known.
  std::function<SteadyStateParams(double z)> steady;

  double initial_mean(double z) const {
    if (init.kind == InitialCondition::Kind::UniformInterval)
      return 0.5 * (init.lo(z) + init.hi(z));
    return 0.0;  // catalog double-Gaussian is symmetric
  }

  // Checks coefficient sums, diffusion sign, and unit initial mass.
  void validate() const;
};

// --- operations ----------------------------------------------------------

// Integrand of the nonlocal mean-field drift,
// P(v,w,z) = 1/2 [ (p1+q2-2) w + (p2+q1) v ], coefficients at s = |v-w|.
double drift_kernel(double v, double w, double z, const ModelSpec& model);

struct InteractionResult {
  double v;
  double w;
  int boundary_snaps{0};  // roundoff-scale repairs at the domain boundary
};

// One binary interaction with independent noises eta_v, eta_w.
InteractionResult apply_interaction(double v, double w, double z, double eta_v,
                                    double eta_w, double eps, const ModelSpec& model);

// Largest symmetric bound b such that |eta| <= b keeps both post-interaction
// states in V. Closed forms for the catalog diffusion shapes; 0 otherwise.
double admissible_noise_bound(double v, double w, double z, double eps,
                              const ModelSpec& model);

struct NoiseDraw {
  double eta;
  double variance_deficit;  // eps*sigma2 - b^2/3 when truncated, else 0
};

// Uniform noise on [-b, b] with b = min(sqrt(3 eps sigma2), bound).
NoiseDraw sample_noise(double bound, double eps, const ModelSpec& model, RngStream& rng);

// --- catalog --------------------------------------------------------------

std::vector<std::string> catalog_keys();
ModelSpec make_model(const std::string& key);
std::string model_description(const std::string& key);

}  // namespace kuq
