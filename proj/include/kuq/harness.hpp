#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kuq/uq.hpp"

namespace kuq {

enum class ReferenceKind {
  SteadyCollocation,  // analytic E[~f_inf] by collocation (steady-state runs)
  DsmcCollocation,    // collocation-in-z of averaged independent DSMC runs
  FpFine,             // refined-grid mean-field solution at collocation nodes
};
std::string to_string(ReferenceKind kind);

struct ScenarioSpec {
  std::string model_key;
  std::vector<EstimatorKind> kinds{EstimatorKind::MC};
  std::size_t N{10000};
  std::vector<std::size_t> M_list{20};
  int N_MF{20};
  std::size_t M_MF{0};
  int k{1};
  int N_Z{100};
  double eps{0.1};
  double t_final{5.0};
  std::vector<double> snapshot_times;  // empty -> {t_final}
  std::vector<QoiSpec> qois{QoiSpec{}};
  int R{50};
  std::uint64_t seed{1u};
  std::string out_dir{"out"};
  ReferenceKind reference{ReferenceKind::SteadyCollocation};
  int ref_runs{200};
  int collocation_nodes{20};
  int threads{0};  // 0 = auto (flag, then env, then hardware)

  std::string canonical_text() const;  // resolved key-value echo, hashable
  void validate() const;
};

// Flat key-value scenario document with [model]/[solver]/[uq]/[output]
// sections. Unknown or duplicate keys are configuration errors.
ScenarioSpec parse_scenario(const std::string& text);
ScenarioSpec load_scenario_file(const std::string& path);

enum class NormOrdering {
  StateThenRandom,  // || E[E_V[g^2]]^(1/2) ||_{L^p(V)}
  RandomThenState,  // E[ || ... ||_{L^p(V)}^2 ]^(1/2)
};

// Discrete L^p error of replicated grid fields against a reference.
double field_error_norm(const std::vector<std::vector<double>>& estimates,
                        const std::vector<double>& reference, double p,
                        double cell_weight,
                        NormOrdering ordering = NormOrdering::StateThenRandom);

struct ErrorPoint {
  std::string kind;
  std::size_t M{0};
  double t{0.0};
  std::string qoi;
  double error_mean{0.0};    // mean over replications of the per-rep error
  double error_stderr{0.0};  // standard error of that mean
  double lambda_mean{0.0};
  double rho_mean{0.0};
  double var_mc{0.0};
  double var_cv{0.0};
  CostLedger cost;
  double wall_seconds{0.0};  // emitted to the timings sidecar only
};

struct FieldDump {
  std::string kind;
  std::size_t M{0};
  std::string qoi;
  std::vector<double> x;
  std::vector<double> value;
};

struct ExperimentReport {
  ScenarioSpec spec;
  std::string config_hash;
  std::string version;
  std::vector<ErrorPoint> points;
  std::vector<FieldDump> densities;  // replication-averaged estimates at t_final
  std::vector<FieldDump> lorenz;
  bool failed{false};
  std::string failure;
};

ExperimentReport run_experiment(const ScenarioSpec& spec);

// Writes report.json plus the per-figure CSVs (error_vs_M.csv,
// error_vs_t.csv, density.csv, lorenz.csv) and a timings.csv sidecar.
// Byte-identical for identical reports.
void emit_report(const ExperimentReport& report, const std::string& directory);

std::uint64_t fnv1a64(const std::string& text);
std::string version_string();

}  // namespace kuq
