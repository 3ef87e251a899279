#pragma once

#include <vector>

#include "kuq/dsmc.hpp"
#include "kuq/meanfield.hpp"

namespace kuq {

struct Histogram {
  Grid1D grid;
  std::vector<double> values;        // density units
  std::size_t out_of_window{0};     // particles outside the grid, not binned

  double mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.dw();
  }
};

struct LorenzCurveData {
  std::vector<double> population;  // F_j, starting at 0, ending at 1
  std::vector<double> wealth;      // L_j, same length
};

// First-order histogram: each particle adds 1/(N dw) to its containing cell.
Histogram reconstruct(const ParticleEnsemble& ens, const Grid1D& grid);

// (1/N) sum w_i^order.
double moment(const ParticleEnsemble& ens, int order);

// Fraction of particles strictly above the threshold.
double tail_distribution(const ParticleEnsemble& ens, double threshold);
// Mass above the threshold, partial cells by linear share.
double tail_distribution(const Histogram& hist, double threshold);
double tail_distribution(const GridDensity& density, double threshold);

// Particle Lorenz curve: sort ascending, F_j = j/N, L_j = partial wealth share.
LorenzCurveData lorenz_curve(const ParticleEnsemble& ens);

// 1 - 2 * (trapezoidal area under the piecewise-linear curve).
double gini(const LorenzCurveData& curve);

void write_lorenz_csv(const LorenzCurveData& curve, const std::string& path);

}  // namespace kuq
