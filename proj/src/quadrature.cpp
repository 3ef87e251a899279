#include "kuq/quadrature.hpp"

#include <cmath>

#include "kuq/common.hpp"

namespace kuq {

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw argument_error("gauss_legendre: order must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

namespace {

// Kronrod 15 nodes/weights with embedded Gauss 7.
constexpr double kK15Nodes[15] = {
    -0.9914553711208126, -0.9491079123427585, -0.8648644233597691,
    -0.7415311855993945, -0.5860872354676911, -0.4058451513773972,
    -0.2077849550078985, 0.0,                 0.2077849550078985,
    0.4058451513773972,  0.5860872354676911,  0.7415311855993945,
    0.8648644233597691,  0.9491079123427585,  0.9914553711208126};
constexpr double kK15Weights[15] = {
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278, 0.2044329400752989,
    0.1903505780647854, 0.1690047266392679, 0.1406532597155259,
    0.1047900103222502, 0.0630920926299786, 0.0229353220105292};
constexpr double kG7Weights[7] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
    0.1294849661688697};

struct GkResult {
  double value;
  double error;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double k = 0.0, g = 0.0;
  for (int i = 0; i < 15; ++i) {
    const double fx = f(c + h * kK15Nodes[i]);
    k += kK15Weights[i] * fx;
    if (i % 2 == 1) g += kG7Weights[i / 2] * fx;
  }
  k *= h;
  g *= h;
  double err = std::abs(k - g);
  // Standard QUADPACK-style sharpening of the embedded estimate.
  err = std::pow(200.0 * err, 1.5);
  return {k, err};
}

double adapt(const std::function<double(double)>& f, double a, double b,
             double tol, int depth, double whole) {
  GkResult r = gk15(f, a, b);
  if (r.error <= tol || r.error <= 1e-16 * std::abs(whole)) return r.value;
  if (depth >= 60)
    throw numeric_error("integrate: adaptive quadrature did not converge");
  const double c = 0.5 * (a + b);
  return adapt(f, a, c, 0.5 * tol, depth + 1, whole) +
         adapt(f, c, b, 0.5 * tol, depth + 1, whole);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol, double abs_tol) {
  if (!(a <= b)) throw argument_error("integrate: requires a <= b");
  if (a == b) return 0.0;
  GkResult first = gk15(f, a, b);
  if (!std::isfinite(first.value))
    throw numeric_error("integrate: non-finite integrand");
  double tol = std::max(abs_tol, rel_tol * std::abs(first.value));
  if (first.error <= tol) return first.value;
  return adapt(f, a, b, tol, 0, first.value);
}

double cell_average(const std::function<double(double)>& f, double a, double b,
                    int order) {
  static const QuadratureRule g2 = gauss_legendre(2);
  static const QuadratureRule g4 = gauss_legendre(4);
  static const QuadratureRule g8 = gauss_legendre(8);
  const QuadratureRule& rule = order <= 2 ? g2 : (order <= 4 ? g4 : g8);
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    s += rule.weights[i] * f(c + h * rule.nodes[i]);
  return 0.5 * s;
}

}  // namespace kuq
