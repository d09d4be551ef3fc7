#pragma once

#include "hsq/inverse_problem.hpp"
#include "hsq/io.hpp"
#include "hsq/sparse_quad.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace hsq {

enum class ProblemKind { Linear, Darcy };
enum class Parametrization { Prior, Hessian };
enum class QoiKind { Q1, Q2 };

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::Linear;

  int alpha = 1;
  double beta = 5e-2;
  double gamma = 0.0;
  double kappa = 0.0;
  double sigma = 1e-2;
  int mesh_exp = 10;
  int obs_count = 65;
  std::uint64_t seed = 1;

  // Linear: smoothness used to draw the synthetic truth.
  int data_alpha = 1;
  // Darcy: divide each observation functional by its integral.
  bool obs_normalize = false;  // true in the Darcy defaults
  int measure_count = 5;

  Parametrization mode = Parametrization::Hessian;
  Construction construction = Construction::APosteriori;
  QoiKind qoi = QoiKind::Q1;
  std::size_t max_points = 10000;
  std::size_t max_indices = 20000;
  double tolerance = 0.0;
  bool work_normalized = false;
  bool skip_inert_dimensions = true;
  double bnu_c = 0.5;
  double bnu_beta = -1.0;  // < 0: α − 1/2 − 0.05
  int bnu_r = 2;

  double misfit_cutoff = -1.0;  // < 0: 1e-12
  double map_tol = 1e-10;
  bool gauss_newton_posterior = false;  // true in the Darcy defaults
  int truncation = -1;  // -1: every available mode

  // Darcy self-reference: same run continued to reference_factor × max_points.
  double reference_factor = 10.0;
  // Linear: also report the E[Q1] formula without the 1/2.
  bool printed_q1_reference = false;

  int mc_trials = 0;
  std::size_t mc_max_samples = 10000;

  int threads = 1;
  std::string out_dir;

  static ExperimentConfig defaults(ProblemKind kind);
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j, ProblemKind kind);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct ConvergenceRow {
  std::string series;
  std::size_t n_points = 0;
  std::size_t n_indices = 0;
  double value = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
};

struct ConvergenceRecord {
  std::vector<ConvergenceRow> rows;
  std::map<std::string, double> rates;  // fitted s per series (absent when not fittable)

  std::vector<ConvergenceRow> series(const std::string& name) const;
  CsvTable table() const;
  static ConvergenceRecord from_table(const CsvTable& t);
};

// 10, 20, 50, 100, ... ≤ max.
std::vector<std::size_t> checkpoint_ladder(std::size_t max_points, std::size_t first = 10);

struct RateFit {
  double rate = 0.0;
  double intercept = 0.0;
  std::size_t used = 0;
};

// −slope of log(error) vs log(n) over the last decade of n (a 25% slack admits
// a checkpoint that fell just short of its budget).
// Needs ≥ 5 points spanning ≥ 1 decade; throws std::invalid_argument otherwise.
RateFit estimate_rate(const std::vector<double>& n, const std::vector<double>& err);
RateFit estimate_rate(const std::vector<ConvergenceRow>& rows);

// Linear problem, fully assembled.
struct LinearSetup {
  ExperimentConfig cfg;
  std::shared_ptr<LinearPoissonProblem> problem;
  Vec m_true;
  Vec u_true;
  MapResult map;
  EigenPairs prior_pairs;
  PosteriorEigen post;
  GaussianField prior_field;
  GaussianField posterior_field;
};

LinearSetup build_linear(const ExperimentConfig& cfg);

QoI linear_qoi(const LinearPoissonProblem& p, QoiKind kind);
// Weight vector w with Q2 = (wᵀm)², w = 𝕄𝕂⁻¹d.
Vec linear_q2_weights(const LinearPoissonProblem& p);

// E[Q1] = exp(m(0.5) + ½Σλψ(0.5)²); `printed` drops the ½.
double reference_q1_linear(const Vec& mean, const EigenPairs& pairs, int mid, bool printed = false);
// E[Q2] = (wᵀm)² + Σλ(wᵀψ)².
double reference_q2_linear(const Vec& mean, const EigenPairs& pairs, const Vec& w);

struct DarcySetup {
  ExperimentConfig cfg;
  std::shared_ptr<DarcyProblem> problem;
  DarcyPrior prior_spec;
  Vec m_true;
  Vec u_true;
  MapResult map;
  EigenPairs prior_pairs;
  PosteriorEigen post;
  GaussianField prior_field;
  GaussianField posterior_field;
};

DarcySetup build_darcy(const ExperimentConfig& cfg);
QoI darcy_qoi(const DarcyProblem& p);  // u(0.5)

struct ExperimentResult {
  ExperimentConfig cfg;
  QuadratureResult quad;
  ConvergenceRecord record;
  std::map<std::string, double> references;
  std::map<std::string, double> final_values;
  Vec prior_spectrum;
  Vec posterior_spectrum;
  Vec misfit_spectrum;
  std::vector<int> max_levels;  // per dimension, from the adopted index set
  nlohmann::json summary;
  bool converged = false;
};

ExperimentResult run_convergence(const ExperimentConfig& cfg);
ExperimentResult run_linear(const LinearSetup& setup);
ExperimentResult run_darcy(const DarcySetup& setup);

// Plain Monte Carlo over ξ ~ N(0, I) in the posterior parametrization of the
// linear problem. Error is the trial average of |mean_N − reference|.
ConvergenceRecord mc_baseline(const LinearSetup& setup, QoiKind qoi, int n_trials,
                              std::size_t max_samples);

// Writes convergence.csv, spectrum.csv, trace.csv and summary.json.
void write_outputs(const ExperimentResult& res, const std::string& dir);

}  // namespace hsq
