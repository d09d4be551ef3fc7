#include "hsq/inverse_problem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hsq {

BayesProblem::BayesProblem(Mesh1D mesh, AAlpha prior, Vec prior_mean)
    : mesh_(mesh), prior_(std::move(prior)), m0_(std::move(prior_mean)) {
  if (m0_.size() == 0) m0_ = Vec::Zero(prior_.size());
  if (m0_.size() != prior_.size()) throw std::invalid_argument("prior mean has the wrong size");
}

double BayesProblem::prior_term(const Vec& m) const {
  const Vec d = m - m0_;
  return 0.5 * d.dot(prior_.apply(d));
}

double BayesProblem::cost(const Vec& m) const { return potential(solve(m)) + prior_term(m); }

Vec BayesProblem::gradient(const Vec& m) const {
  return misfit_gradient(solve(m)) + prior_.apply(m - m0_);
}

Vec BayesProblem::hessian_action(const Vec& m, const Vec& mhat, bool gauss_newton) const {
  return misfit_hessian(m, gauss_newton)(mhat) + prior_.apply(mhat);
}

double BayesProblem::prior_norm_of_gradient(const Vec& g) const {
  return std::sqrt(std::max(0.0, g.dot(prior_.apply_inv(g))));
}

// ---------------------------------------------------------------- Poisson

LinearPoissonProblem::LinearPoissonProblem(const Mesh1D& mesh, double beta, int alpha,
                                           double sigma, Vec y, Vec prior_mean)
    : BayesProblem(mesh,
                   AAlpha(assemble(mesh, OperatorKind::StiffnessA, beta, 0.0),
                          assemble(mesh, OperatorKind::Mass), alpha),
                   std::move(prior_mean)),
      poisson_(mesh),
      beta_(beta),
      sigma_(sigma),
      y_(std::move(y)) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (y_.size() != mesh.n_interior()) throw std::invalid_argument("data must live on interior nodes");
}

State LinearPoissonProblem::solve(const Vec& m) const {
  if (m.size() != n_param()) throw std::invalid_argument("parameter has the wrong size");
  return {m, poisson_.solve(m), Vec()};
}

double LinearPoissonProblem::potential(const State& s) const {
  const Vec r = y_ - s.u;
  return 0.5 / (sigma_ * sigma_) * r.dot(poisson_.mass().apply(r));
}

Vec LinearPoissonProblem::misfit_gradient(const State& s) const {
  const Vec r = y_ - s.u;
  const auto& mass = poisson_.mass();
  return -mass.apply(poisson_.solve_stiffness(mass.apply(r))) / (sigma_ * sigma_);
}

LinOp LinearPoissonProblem::misfit_hessian(const Vec&, bool) const {
  const double s2 = 1.0 / (sigma_ * sigma_);
  return [this, s2](const Vec& v) {
    const auto& mass = poisson_.mass();
    Vec u = poisson_.solve(v);  // 𝕂⁻¹𝕄v
    return Vec(s2 * mass.apply(poisson_.solve_stiffness(mass.apply(u))));
  };
}

// ---------------------------------------------------------------- Darcy

ObservationSetup ObservationSetup::mollified(const Mesh1D& mesh, Vec centers, double radius,
                                             double sigma, bool normalize) {
  if (!(sigma > 0.0) || !(radius > 0.0) || centers.size() < 1) {
    throw std::invalid_argument("observation setup needs K >= 1, sigma > 0, radius > 0");
  }
  ObservationSetup obs;
  obs.centers = std::move(centers);
  obs.radius = radius;
  obs.sigma = sigma;
  obs.B.resize(obs.count(), mesh.n_nodes());
  for (int k = 0; k < obs.count(); ++k) {
    const double c = obs.centers(k);
    Vec row = assemble_load(mesh, [c, radius](double x) {
      const double t = (x - c) / radius;
      return std::exp(-0.5 * t * t);
    });
    if (normalize) row /= row.sum();
    obs.B.row(k) = row.transpose();
  }
  obs.y = Vec::Zero(obs.count());
  return obs;
}

FemOperator darcy_measurement_operator(const Mesh1D& mesh, const DarcyPrior& p) {
  const Vec pts = p.measure_points;
  const double r = p.radius;
  return assemble_weighted_mass(
      mesh,
      [pts, r](double x) {
        double s = 0.0;
        for (int l = 0; l < pts.size(); ++l) {
          const double t = (x - pts(l)) / r;
          s += std::exp(-0.5 * t * t);
        }
        return s;
      },
      Boundary::Natural);
}

AAlpha darcy_prior_operator(const Mesh1D& mesh, const DarcyPrior& p) {
  FemOperator a = assemble(mesh, OperatorKind::StiffnessA, p.beta, p.gamma, Boundary::Natural);
  if (p.kappa != 0.0) a = add(a, darcy_measurement_operator(mesh, p), p.kappa);
  return AAlpha(a, assemble(mesh, OperatorKind::Mass, 1.0, 0.0, Boundary::Natural), p.alpha);
}

Vec darcy_prior_mean(const Mesh1D& mesh, const DarcyPrior& p, const Vec& m_true) {
  FemOperator a = assemble(mesh, OperatorKind::StiffnessA, p.beta, p.gamma, Boundary::Natural);
  FemOperator meas = darcy_measurement_operator(mesh, p);
  FemOperator lhs = add(a, meas, p.kappa);
  return TridiagCholesky(lhs.matrix).solve(p.kappa * meas.apply(m_true));
}

namespace {

// Nodal vector of Σ_c coef_c (Δv)_c (Δφ_i)_c / h over all nodes.
Vec cell_form(const Vec& coef, const Vec& v, double h) {
  Vec out = Vec::Zero(v.size());
  for (int c = 0; c < coef.size(); ++c) {
    const double f = coef(c) * (v(c + 1) - v(c)) / h;
    out(c) -= f;
    out(c + 1) += f;
  }
  return out;
}

// Σ_{c∋i} ½ t_c for cell values t.
Vec cells_to_nodes(const Vec& t) {
  Vec out = Vec::Zero(t.size() + 1);
  out.head(t.size()) += 0.5 * t;
  out.tail(t.size()) += 0.5 * t;
  return out;
}

Vec diff(const Vec& v) { return v.tail(v.size() - 1) - v.head(v.size() - 1); }

Vec embed_interior(const Vec& inner) {
  Vec out = Vec::Zero(inner.size() + 2);
  out.segment(1, inner.size()) = inner;
  return out;
}

Vec interior(const Vec& full) { return full.segment(1, full.size() - 2); }

}  // namespace

DarcyProblem::DarcyProblem(const Mesh1D& mesh, AAlpha prior, Vec prior_mean, ObservationSetup obs)
    : BayesProblem(mesh, std::move(prior), std::move(prior_mean)), obs_(std::move(obs)) {
  if (n_param() != mesh.n_nodes()) throw std::invalid_argument("Darcy prior must live on all nodes");
  if (obs_.B.cols() != mesh.n_nodes()) throw std::invalid_argument("observation operator size mismatch");
}

State DarcyProblem::solve(const Vec& m) const {
  if (m.size() != n_param()) throw std::invalid_argument("parameter has the wrong size");
  State s;
  s.m = m;
  s.k = darcy_coefficients(m, mesh_);
  s.u = solve_darcy_cells(s.k, mesh_);
  return s;
}

double DarcyProblem::potential(const State& s) const {
  const Vec r = obs_.y - obs_.B * s.u;
  return 0.5 * r.squaredNorm() / (obs_.sigma * obs_.sigma);
}

Vec DarcyProblem::adjoint(const State& s) const {
  const Vec r = obs_.y - obs_.B * s.u;
  const Vec rhs = obs_.B.transpose() * r / (obs_.sigma * obs_.sigma);
  TridiagCholesky a(darcy_stiffness(s.k, mesh_));
  return embed_interior(a.solve(interior(rhs)));
}

Vec DarcyProblem::misfit_gradient(const State& s) const {
  const Vec p = adjoint(s);
  const Vec t = s.k.cwiseProduct(diff(s.u)).cwiseProduct(diff(p)) / mesh_.h;
  return cells_to_nodes(t);
}

LinOp DarcyProblem::misfit_hessian(const Vec& m, bool gauss_newton) const {
  State s = solve(m);
  const Vec r = obs_.y - obs_.B * s.u;
  const double g = 1.0 / (obs_.sigma * obs_.sigma);
  auto a = std::make_shared<TridiagCholesky>(darcy_stiffness(s.k, mesh_));
  const Vec p = embed_interior(a->solve(interior(Vec(obs_.B.transpose() * r * g))));
  const Vec du = diff(s.u), dp = diff(p);
  const double h = mesh_.h;
  const Vec k = s.k;
  const Vec u = s.u;
  return [=, this](const Vec& mhat) {
    const Vec mh_cell = 0.5 * (mhat.head(mhat.size() - 1) + mhat.tail(mhat.size() - 1));
    const Vec dk = k.cwiseProduct(mh_cell);
    const Vec uhat = embed_interior(a->solve(-interior(cell_form(dk, u, h))));
    Vec rhs = -Vec(obs_.B.transpose() * (obs_.B * uhat)) * g;
    if (!gauss_newton) rhs -= cell_form(dk, p, h);
    const Vec phat = embed_interior(a->solve(interior(rhs)));
    Vec t = du.cwiseProduct(diff(phat));
    if (!gauss_newton) {
      t += diff(uhat).cwiseProduct(dp) + mh_cell.cwiseProduct(du).cwiseProduct(dp);
    }
    return cells_to_nodes(k.cwiseProduct(t) / h);
  };
}

// ---------------------------------------------------------------- MAP

namespace {

struct CgResult {
  Vec d;
  int iters = 0;
};

// Preconditioned CG on H d = −g with 𝔸_α⁻¹ as preconditioner; stops early on
// negative curvature.
CgResult newton_cg(const LinOp& H, const AAlpha& prec, const Vec& g, double eta, int max_iter) {
  CgResult out;
  out.d = Vec::Zero(g.size());
  Vec r = -g;
  Vec z = prec.apply_inv(r);
  Vec p = z;
  double rz = r.dot(z);
  const double rz0 = rz;
  if (rz0 <= 0.0) return out;
  for (int it = 0; it < max_iter; ++it) {
    const Vec hp = H(p);
    const double php = p.dot(hp);
    if (php <= 0.0) {
      if (it == 0) out.d = p;
      break;
    }
    const double a = rz / php;
    out.d += a * p;
    r -= a * hp;
    z = prec.apply_inv(r);
    const double rz_new = r.dot(z);
    out.iters = it + 1;
    if (rz_new <= eta * eta * rz0) break;
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return out;
}

}  // namespace

MapResult find_map(const BayesProblem& p, const Vec& m_init, const MapOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("find_map: tol must be positive");
  MapResult res;
  Vec m = m_init;
  double c = p.cost(m);
  Vec g = p.gradient(m);
  const double gn0 = p.prior_norm_of_gradient(g);
  res.initial_gradient_norm = gn0;
  res.cost_history.push_back(c);
  double gn = gn0;

  for (int it = 0; it <= opts.max_newton; ++it) {
    if (gn <= opts.tol * gn0 || gn <= opts.abs_tol) {
      res.converged = true;
      break;
    }
    if (it == opts.max_newton) break;
    const bool gn_step = !opts.full_newton || it < opts.gauss_newton_iters;
    LinOp misfit = p.misfit_hessian(m, gn_step);
    LinOp H = [&](const Vec& v) { return Vec(misfit(v) + p.prior().apply(v)); };
    const double eta = std::min(0.5, std::sqrt(gn / gn0));
    CgResult cg = newton_cg(H, p.prior(), g, eta, opts.max_cg);
    res.cg_iters += cg.iters;

    double slope = g.dot(cg.d);
    if (!(slope < 0.0)) {
      // Fall back to preconditioned steepest descent.
      cg.d = -p.prior().apply_inv(g);
      slope = g.dot(cg.d);
    }
    double t = 1.0;
    bool accepted = false;
    Vec m_new;
    double c_new = c;
    for (int b = 0; b < opts.max_backtrack; ++b, t *= 0.5) {
      m_new = m + t * cg.d;
      c_new = p.cost(m_new);
      if (std::isfinite(c_new) && c_new <= c + opts.armijo_c * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted || !(c_new < c)) {
      // The Newton decrement is below the cost's rounding level: nothing more to gain.
      res.converged = -slope <= 1e-13 * std::max(1.0, std::abs(c));
      break;
    }
    m = m_new;
    c = c_new;
    g = p.gradient(m);
    gn = p.prior_norm_of_gradient(g);
    res.cost_history.push_back(c);
    res.newton_iters = it + 1;
  }
  res.map_point = m;
  res.cost_at_map = c;
  res.final_gradient_norm = gn;
  return res;
}

// ---------------------------------------------------------------- posterior

PosteriorEigen two_step_posterior(const AAlpha& prior, const LinOp& misfit_hessian,
                                  const PosteriorOptions& opts) {
  const int n = prior.size();
  PosteriorEigen out;

  // The full Hessian at the MAP point can be indefinite. Negative pairs (λ > −1)
  // widen the posterior and are kept like positive ones.
  RandomizedOptions ro = opts.randomized;
  ro.drop_tol = 0.0;
  ro.by_magnitude = true;
  const int J1 = opts.misfit_modes < 0 ? n : std::min(opts.misfit_modes, n);
  EigenPairs step1 = randomized_eigen(misfit_hessian, a_alpha_factor(prior), J1, ro);
  std::vector<int> keep;
  for (int j = 0; j < step1.count(); ++j) {
    if (std::abs(step1.values(j)) > opts.misfit_cutoff) keep.push_back(j);
  }
  out.misfit.values.resize(static_cast<int>(keep.size()));
  out.misfit.vectors.resize(n, static_cast<int>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const double lam = step1.values(keep[c]);
    if (!(lam > -1.0)) throw std::runtime_error("posterior: misfit Hessian makes the posterior precision indefinite");
    out.misfit.values(static_cast<int>(c)) = lam;
    out.misfit.vectors.col(static_cast<int>(c)) = step1.vectors.col(keep[c]);
  }

  const Mat psi = out.misfit.vectors;
  const Vec d = out.misfit.values.array() / (1.0 + out.misfit.values.array());
  auto cov = [&prior, psi, d](const Vec& v) {
    const Vec mv = prior.apply_mass(v);
    Vec w = prior.apply_inv(mv);
    if (psi.cols() > 0) w -= psi * d.cwiseProduct(psi.transpose() * mv);
    return prior.apply_mass(w);
  };
  const int J = opts.posterior_modes < 0 ? n : std::min(opts.posterior_modes, n);
  out.posterior = randomized_eigen(cov, mass_factor(prior), J, opts.randomized);
  return out;
}

PosteriorEigen posterior_eigen(const BayesProblem& p, const MapResult& map,
                               const PosteriorOptions& opts) {
  if (!map.converged) throw std::runtime_error("posterior_eigen: MAP point not converged");
  return two_step_posterior(p.prior(), p.misfit_hessian(map.map_point, opts.gauss_newton), opts);
}

// ---------------------------------------------------------------- integrands

double j1(const BayesProblem& p, const GaussianField& posterior, double cost_at_map,
          const SparsePoint& xi) {
  const Vec m = posterior.map(xi);
  double sq = 0.0;
  for (auto [j, x] : xi) sq += x * x;
  return p.cost(m) - cost_at_map - 0.5 * sq;
}

Integrand gaussian_integrand(std::shared_ptr<const BayesProblem> p, GaussianField field, QoI q) {
  Integrand g;
  g.n_outputs = 1;
  g.dim_hint = field.truncation;
  g.eval = [p, field = std::move(field), q](const SparsePoint& xi) {
    const Vec m = field.map(xi);
    const State s = p->solve(m);
    return std::vector<double>{q(m, s)};
  };
  return g;
}

Integrand hessian_reweighted_integrand(std::shared_ptr<const BayesProblem> p,
                                       GaussianField posterior, double cost_at_map, QoI q) {
  Integrand g;
  g.n_outputs = 2;
  g.dim_hint = posterior.truncation;
  g.eval = [p, field = std::move(posterior), cost_at_map, q](const SparsePoint& xi) {
    const Vec m = field.map(xi);
    const State s = p->solve(m);
    double sq = 0.0;
    for (auto [j, x] : xi) sq += x * x;
    const double jj = p->potential(s) + p->prior_term(m) - cost_at_map - 0.5 * sq;
    const double w = std::exp(-jj);
    return std::vector<double>{w, q(m, s) * w};
  };
  return g;
}

Integrand prior_reweighted_integrand(std::shared_ptr<const BayesProblem> p, GaussianField prior,
                                     double potential_shift, QoI q) {
  Integrand g;
  g.n_outputs = 2;
  g.dim_hint = prior.truncation;
  g.eval = [p, field = std::move(prior), potential_shift, q](const SparsePoint& xi) {
    const Vec m = field.map(xi);
    const State s = p->solve(m);
    const double w = std::exp(-(p->potential(s) - potential_shift));
    return std::vector<double>{w, q(m, s) * w};
  };
  return g;
}

}  // namespace hsq
