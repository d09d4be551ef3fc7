#pragma once

#include "hsq/fem1d.hpp"
#include "hsq/gaussian_measure.hpp"
#include "hsq/sparse_quad.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hsq {

// Forward solution at one parameter value. `u` holds the state on the problem's
// own node set; `k` the Darcy cell coefficients (empty for Poisson).
struct State {
  Vec m;
  Vec u;
  Vec k;
};

// Quantity of interest as a function of parameter and state.
using QoI = std::function<double(const Vec& m, const State& s)>;

class BayesProblem {
 public:
  BayesProblem(Mesh1D mesh, AAlpha prior, Vec prior_mean);
  virtual ~BayesProblem() = default;

  const Mesh1D& mesh() const { return mesh_; }
  const AAlpha& prior() const { return prior_; }
  const Vec& prior_mean() const { return m0_; }
  int n_param() const { return prior_.size(); }

  virtual State solve(const Vec& m) const = 0;
  // Φ = ½‖y − 𝒢(m)‖²_Γ.
  virtual double potential(const State& s) const = 0;
  // ∇Φ, using the adjoint of the given state.
  virtual Vec misfit_gradient(const State& s) const = 0;
  // Action of the misfit Hessian at m. The returned closure keeps the state and
  // adjoint, so each call costs only the incremental solves.
  virtual LinOp misfit_hessian(const Vec& m, bool gauss_newton = false) const = 0;

  double potential(const Vec& m) const { return potential(solve(m)); }
  // ½‖m − m₀‖²_{𝒞₀} = ½ (m − m₀)ᵀ𝔸_α(m − m₀).
  double prior_term(const Vec& m) const;
  double cost(const Vec& m) const;
  Vec gradient(const Vec& m) const;
  Vec hessian_action(const Vec& m, const Vec& mhat, bool gauss_newton = false) const;
  // ‖g‖_{𝒞₀} = √(gᵀ𝔸_α⁻¹g).
  double prior_norm_of_gradient(const Vec& g) const;

 protected:
  Mesh1D mesh_;
  AAlpha prior_;
  Vec m0_;
};

// −u'' = m on (0,1), u = 0 at both ends; parameter and state on the interior
// nodes. Data is a nodal field y, Φ = (1/2σ²)(y − u)ᵀ𝕄(y − u).
class LinearPoissonProblem : public BayesProblem {
 public:
  LinearPoissonProblem(const Mesh1D& mesh, double beta, int alpha, double sigma, Vec y,
                       Vec prior_mean = Vec());

  using BayesProblem::potential;
  State solve(const Vec& m) const override;
  double potential(const State& s) const override;
  Vec misfit_gradient(const State& s) const override;
  LinOp misfit_hessian(const Vec& m, bool gauss_newton = false) const override;

  const PoissonSolver& poisson() const { return poisson_; }
  double sigma() const { return sigma_; }
  double beta() const { return beta_; }
  const Vec& data() const { return y_; }
  // Interior index of the node at x = 0.5.
  int mid_index() const { return mesh_.n_cells / 2 - 1; }

 private:
  PoissonSolver poisson_;
  double beta_;
  double sigma_;
  Vec y_;
};

// K mollified point functionals on the state, Γ = σ²I.
struct ObservationSetup {
  Vec centers;
  double radius = 0.0;
  double sigma = 1.0;
  Mat B;  // K × n_nodes
  Vec y;

  static ObservationSetup mollified(const Mesh1D& mesh, Vec centers, double radius, double sigma,
                                    bool normalize);
  int count() const { return static_cast<int>(centers.size()); }
};

struct DarcyPrior {
  double beta = 2.0;
  double gamma = 1.0;
  double kappa = 1e3;
  int alpha = 1;
  Vec measure_points;  // x^l
  double radius = 0.0;
};

// Builds 𝔸 = β𝕂 + γ𝕄 + κℳ on all nodes and the prior AAlpha from it.
AAlpha darcy_prior_operator(const Mesh1D& mesh, const DarcyPrior& p);
// ℳ: mass matrix weighted by Σ_l exp(−(x − x^l)²/(2r²)).
FemOperator darcy_measurement_operator(const Mesh1D& mesh, const DarcyPrior& p);
// m₀ from (β𝕂 + γ𝕄 + κℳ) m₀ = κℳ m_true.
Vec darcy_prior_mean(const Mesh1D& mesh, const DarcyPrior& p, const Vec& m_true);

// −(e^m u')' = 0, u(0) = 1, u(1) = 0; parameter on all nodes.
class DarcyProblem : public BayesProblem {
 public:
  DarcyProblem(const Mesh1D& mesh, AAlpha prior, Vec prior_mean, ObservationSetup obs);

  using BayesProblem::potential;
  State solve(const Vec& m) const override;
  double potential(const State& s) const override;
  Vec misfit_gradient(const State& s) const override;
  LinOp misfit_hessian(const Vec& m, bool gauss_newton = false) const override;

  const ObservationSetup& observations() const { return obs_; }
  Vec observe(const State& s) const { return obs_.B * s.u; }
  // Adjoint p on all nodes (zero at the Dirichlet ends).
  Vec adjoint(const State& s) const;

 private:
  ObservationSetup obs_;
};

struct MapOptions {
  double tol = 1e-8;
  double abs_tol = 1e-9;
  int max_newton = 50;
  int gauss_newton_iters = 5;
  bool full_newton = true;
  int max_cg = 200;
  int max_backtrack = 40;
  double armijo_c = 1e-4;
};

struct MapResult {
  Vec map_point;
  double cost_at_map = 0.0;
  int newton_iters = 0;
  int cg_iters = 0;
  double initial_gradient_norm = 0.0;
  double final_gradient_norm = 0.0;
  bool converged = false;
  std::vector<double> cost_history;
};

MapResult find_map(const BayesProblem& p, const Vec& m_init, const MapOptions& opts = {});

struct PosteriorOptions {
  double misfit_cutoff = 1e-2;
  int misfit_modes = -1;    // J₁ candidates for step (i); -1 = all
  int posterior_modes = -1;  // J for step (ii); -1 = all
  bool gauss_newton = false;
  RandomizedOptions randomized;
};

struct PosteriorEigen {
  EigenPairs misfit;     // retained pairs of H_misfit ψ = λ 𝔸_α ψ
  EigenPairs posterior;  // pairs of 𝕄 𝒞₁ 𝕄 ψ = λ 𝕄 ψ
};

// Two-step procedure for an arbitrary misfit Hessian action.
PosteriorEigen two_step_posterior(const AAlpha& prior, const LinOp& misfit_hessian,
                                  const PosteriorOptions& opts = {});

PosteriorEigen posterior_eigen(const BayesProblem& p, const MapResult& map,
                               const PosteriorOptions& opts = {});

// ∫ ... dμ(ξ) integrands. All carry dim_hint = field truncation.
//   gaussian_integrand:        ξ ↦ Q(m(ξ))
//   hessian_reweighted:        ξ ↦ (e^{−𝒥₁}, Q e^{−𝒥₁}),  𝒥₁ = 𝒥(m) − 𝒥(m₁) − ½|ξ|²
//   prior_reweighted:          ξ ↦ (e^{−(Φ − shift)}, Q e^{−(Φ − shift)})
Integrand gaussian_integrand(std::shared_ptr<const BayesProblem> p, GaussianField field, QoI q);
Integrand hessian_reweighted_integrand(std::shared_ptr<const BayesProblem> p,
                                       GaussianField posterior, double cost_at_map, QoI q);
Integrand prior_reweighted_integrand(std::shared_ptr<const BayesProblem> p, GaussianField prior,
                                     double potential_shift, QoI q);

// 𝒥₁(m¹(ξ)) for the posterior field.
double j1(const BayesProblem& p, const GaussianField& posterior, double cost_at_map,
          const SparsePoint& xi);

}  // namespace hsq
