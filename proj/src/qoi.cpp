#include "kuq/qoi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace kuq {

Histogram reconstruct(const ParticleEnsemble& ens, const Grid1D& grid) {
  grid.validate();
  Histogram h;
  h.grid = grid;
  h.values.assign(grid.n, 0.0);
  const double dw = grid.dw();
  const double unit = 1.0 / (static_cast<double>(ens.size()) * dw);
  for (double w : ens.values) {
    if (w < grid.a || w > grid.b) {
      ++h.out_of_window;
      continue;
    }
    int i = static_cast<int>((w - grid.a) / dw);
    if (i == grid.n) i = grid.n - 1;  // right edge belongs to the last cell
    h.values[i] += unit;
  }
  return h;
}

double moment(const ParticleEnsemble& ens, int order) {
  if (ens.size() == 0) throw argument_error("moment: empty ensemble");
  return ens.moment(order);
}

double tail_distribution(const ParticleEnsemble& ens, double threshold) {
  std::size_t above = 0;
  for (double w : ens.values)
    if (w > threshold) ++above;
  return static_cast<double>(above) / static_cast<double>(ens.size());
}

namespace {

double grid_tail(const Grid1D& grid, const std::vector<double>& values, double threshold) {
  if (threshold <= grid.a) {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.dw();
  }
  if (threshold >= grid.b) return 0.0;
  const double dw = grid.dw();
  int i = std::min(grid.n - 1, static_cast<int>((threshold - grid.a) / dw));
  double mass = 0.0;
  for (int j = i + 1; j < grid.n; ++j) mass += values[j] * dw;
  const double cell_right = grid.a + (i + 1) * dw;
  mass += values[i] * (cell_right - threshold);  // linear share of the cut cell
  return mass;
}

}  // namespace

double tail_distribution(const Histogram& hist, double threshold) {
  return grid_tail(hist.grid, hist.values, threshold);
}

double tail_distribution(const GridDensity& density, double threshold) {
  return grid_tail(density.grid, density.values, threshold);
}

LorenzCurveData lorenz_curve(const ParticleEnsemble& ens) {
  const std::size_t n = ens.size();
  if (n == 0) throw argument_error("lorenz_curve: empty ensemble");
  std::vector<double> sorted = ens.values;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 0.0)
    throw argument_error("lorenz_curve: negative state");
  double total = 0.0;
  for (double w : sorted) total += w;
  if (!(total > 0.0)) throw argument_error("lorenz_curve: zero total wealth");

  LorenzCurveData curve;
  curve.population.resize(n + 1);
  curve.wealth.resize(n + 1);
  curve.population[0] = 0.0;
  curve.wealth[0] = 0.0;
  double partial = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    partial += sorted[j];
    curve.population[j + 1] = static_cast<double>(j + 1) / static_cast<double>(n);
    curve.wealth[j + 1] = partial / total;
  }
  return curve;
}

double gini(const LorenzCurveData& curve) {
  const std::size_t n = curve.population.size();
  if (n < 2 || curve.wealth.size() != n)
    throw argument_error("gini: malformed Lorenz curve");
  double area = 0.0;
  for (std::size_t j = 1; j < n; ++j)
    area += (curve.population[j] - curve.population[j - 1]) *
            (curve.wealth[j] + curve.wealth[j - 1]) / 2.0;
  return 1.0 - 2.0 * area;
}

void write_lorenz_csv(const LorenzCurveData& curve, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw numeric_error("write_lorenz_csv: cannot open " + path);
  std::fprintf(f, "F,L\n");
  for (std::size_t j = 0; j < curve.population.size(); ++j)
    std::fprintf(f, "%.17g,%.17g\n", curve.population[j], curve.wealth[j]);
  std::fclose(f);
}

}  // namespace kuq
