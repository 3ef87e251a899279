#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kuq/meanfield.hpp"
#include "kuq/models.hpp"
#include "kuq/qoi.hpp"

namespace kuq {

// M i.i.d. realizations of z with their stream indices.
struct RandomNodeSet {
  std::vector<double> nodes;

  static RandomNodeSet sample(const UncertaintyLaw& law, std::size_t m, RngStream& rng);
};

// M realizations of a scalar or grid-valued quantity, tied to the nodes they
// were evaluated at.
struct QoISampleSet {
  std::vector<std::vector<double>> rows;  // M x dim
  std::vector<double> nodes;              // z_k per row

  std::size_t count() const { return rows.size(); }
  std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }
  void validate() const;
};

// Positive weights summing to one for the z-distribution; Gauss-Legendre for
// the uniform laws used by the catalog.
struct CollocationRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  static CollocationRule for_uniform(int n, const UncertaintyLaw& law);
};

std::vector<double> collocation_mean(
    const std::function<std::vector<double>(double)>& integrand,
    const CollocationRule& rule);
double collocation_mean(const std::function<double(double)>& integrand,
                        const CollocationRule& rule);

// Entrywise sample mean.
std::vector<double> mc_estimate(const QoISampleSet& samples);

// Entrywise lambda* = Cov_M / Var_M over the coupled sample pairs, both
// moments about the sample means. Entries whose control variance falls under
// a relative guard report zero (plain MC there).
std::vector<double> optimal_lambda_hat(const QoISampleSet& primary,
                                       const QoISampleSet& control,
                                       const std::vector<double>& control_mean);

// One lambda for a whole grid-valued QoI: the same moments aggregated over
// entries with the cell measure. Per-cell lambdas at desk-scale M drown in
// their own estimation noise wherever only a few samples activate a cell.
double field_lambda_hat(const QoISampleSet& primary, const QoISampleSet& control,
                        const std::vector<double>& entry_weights);

enum class EstimatorKind { MC, MFCVS, MFCV };
std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

struct QoiSpec {
  enum class Kind { Density, Moment, Tail, Gini, Lorenz };
  Kind kind{Kind::Density};
  int order{1};         // moment
  double threshold{1.0};  // tail
  int points{100};      // lorenz curve resolution

  std::size_t size(int n_z) const;
  std::string name() const;
  static QoiSpec parse(const std::string& text);
};

struct CostLedger {
  std::size_t N{0};
  std::size_t M{0};
  std::size_t N_MF{0};
  std::size_t M_MF{0};
  int k{1};
  double control_mean_se{0.0};     // residual sampling error of E[q[~f]]
  double control_time_offset{0.0}; // |t^n - FP snapshot time| for MFCV, < dt_MF
};

struct CvEstimate {
  EstimatorKind kind{EstimatorKind::MC};
  double t{0.0};
  std::vector<double> value;
  std::vector<double> lambda_hat;  // empty for plain MC
  std::vector<double> rho_hat;
  double var_mc{0.0};  // entry-aggregated variance of the plain-MC estimator
  double var_cv{0.0};  // same for the control-variate estimator
  CostLedger cost;
};

// value = E_M[primary] - lambda (E_M[control] - control_mean), with the
// variance-ratio diagnostics of the optimal-lambda theorem.
CvEstimate cv_estimate(const QoISampleSet& primary, const QoISampleSet& control,
                       const std::vector<double>& control_mean,
                       const std::vector<double>& lambda,
                       const std::vector<double>& entry_weights = {});

// Upper bound floor(k N M / N_MF) on the number of mean-field samples that
// keeps the control variate within the kinetic solve's budget.
std::uint64_t budget_max_mmf(std::uint64_t n, std::uint64_t m, std::uint64_t n_mf,
                             std::uint64_t k);

// --- QoI evaluation against the different solution carriers ---------------

std::vector<double> evaluate_qoi(const ParticleEnsemble& ens, const QoiSpec& q,
                                 const Grid1D& recon);
std::vector<double> evaluate_qoi_density(const std::function<double(double)>& f,
                                         const Interval& window, const QoiSpec& q,
                                         const Grid1D& recon, bool high_accuracy);
std::vector<double> evaluate_qoi_grid(const GridDensity& f, const QoiSpec& q,
                                      const Grid1D& recon);

// --- orchestration ---------------------------------------------------------

struct McvConfig {
  ModelSpec model;
  EstimatorKind kind{EstimatorKind::MC};
  std::size_t N{10000};
  std::size_t M{20};
  int N_MF{20};
  std::size_t M_MF{0};
  int k{1};
  double eps{0.1};
  double t_final{5.0};
  std::vector<double> snapshot_times;  // empty -> {t_final}
  QoiSpec qoi;
  int N_Z{100};
  int collocation_nodes{20};
  std::uint64_t seed{0};
  std::uint32_t replication{0};
  int threads{1};
};

// Full estimator pass at M random nodes; one estimate per snapshot time.
std::vector<CvEstimate> run_mfcv(const McvConfig& cfg);

}  // namespace kuq
