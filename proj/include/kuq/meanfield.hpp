#pragma once

#include <functional>
#include <vector>

#include "kuq/common.hpp"
#include "kuq/models.hpp"

namespace kuq {

struct Grid1D {
  double a{-1.0};
  double b{1.0};
  int n{100};

  double dw() const { return (b - a) / n; }
  double center(int i) const { return a + (i + 0.5) * dw(); }
  // Interior interface i sits between cells i and i+1, i = 0..n-2.
  double iface(int i) const { return a + (i + 1) * dw(); }
  void validate() const {
    if (!(a < b)) throw argument_error("Grid1D: requires a < b");
    if (n < 4) throw argument_error("Grid1D: requires at least 4 cells");
  }
};

struct GridDensity {
  Grid1D grid;
  std::vector<double> values;
  double z{0.0};
  double t{0.0};

  double mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.dw();
  }
  double first_moment() const {
    double s = 0.0;
    for (int i = 0; i < grid.n; ++i) s += grid.center(i) * values[i];
    return s * grid.dw();
  }
  double mean() const { return first_moment() / mass(); }
};

// Normalized steady-state density of the mean-field model.
class SteadyStateDensity {
 public:
  SteadyStateDensity(const SteadyStateParams& params, Interval support);

  double operator()(double w) const;
  double log_density(double w) const;  // -inf outside the support
  const SteadyStateParams& params() const { return params_; }
  const Interval& support() const { return support_; }

 private:
  double log_density_shape(double w) const;

  SteadyStateParams params_;
  Interval support_;
  double log_norm_{0.0};
};

// One-off evaluation; prefer SteadyStateDensity in loops.
double steady_state_density(const SteadyStateParams& params, double w);

// Nonlocal drift B(w) = int_V P(v, w, z) f(v) dv against a grid density.
// Coefficients independent of |v-w| reduce to a closed form in the first two
// discrete moments; otherwise a 2-point Gauss rule per cell is used.
class DriftField {
 public:
  DriftField(const GridDensity& density, const ModelSpec& model);
  double operator()(double w) const;

 private:
  bool linear_;
  double affine_a_{0.0}, affine_b_{0.0};
  const GridDensity* density_{nullptr};
  const ModelSpec* model_{nullptr};
};

// B at the interior cell interfaces (n-1 values).
std::vector<double> assemble_drift(const GridDensity& density, const ModelSpec& model);

struct FpStepStats {
  double mass_correction{0.0};  // mass restored by clipping roundoff negatives
};

// One semi-implicit step of the exponential-fitting flux scheme: nonlocal
// coefficients frozen at the old density, linear drift-diffusion solved
// implicitly, zero flux at both boundaries.
FpStepStats fp_step(GridDensity& density, double dt, const ModelSpec& model);

// Projections onto a grid.
GridDensity project_initial(const ModelSpec& model, const Grid1D& grid, double z);
GridDensity project_cell_centers(const std::function<double(double)>& f,
                                 const Grid1D& grid, double z);
GridDensity project_cell_averages(const std::function<double(double)>& f,
                                  const Grid1D& grid, double z);

// Piecewise-linear evaluation between cell centers, constant beyond them.
double interp_density(const GridDensity& density, double w);

// Accuracy-motivated step bound for the frozen nonlocal coefficient.
double suggest_dt(const ModelSpec& model, const Grid1D& grid, double z);

// March to t_final from the projected initial condition; returns snapshots
// (snapped down to step boundaries).
std::vector<GridDensity> run_fp(const ModelSpec& model, const Grid1D& grid, double z,
                                double t_final, double dt,
                                const std::vector<double>& snapshot_times);

// Same, starting from a caller-provided state.
std::vector<GridDensity> run_fp_from(GridDensity density, const ModelSpec& model,
                                     double t_final, double dt,
                                     const std::vector<double>& snapshot_times);

void write_density_csv(const GridDensity& density, const std::string& path);

}  // namespace kuq
