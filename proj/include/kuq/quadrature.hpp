#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace kuq {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre rule of order n (exact for polynomials of degree 2n-1).
QuadratureRule gauss_legendre(int n);

// Adaptive Gauss7/Kronrod15 on a finite interval. Throws numeric_error when
// the tolerance cannot be met within the recursion budget.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10, double abs_tol = 1e-14);

// Mean value of f over [a, b] by fixed-order Gauss quadrature.
double cell_average(const std::function<double(double)>& f, double a, double b,
                    int order = 4);

}  // namespace kuq
