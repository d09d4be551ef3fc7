#include "hsq/fem1d.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace hsq {

Mesh1D Mesh1D::uniform(int exponent) {
  if (exponent < 1 || exponent > 24) {
    throw std::invalid_argument("mesh exponent out of range: " + std::to_string(exponent));
  }
  Mesh1D m;
  m.exponent = exponent;
  m.n_cells = 1 << exponent;
  m.h = 1.0 / m.n_cells;
  return m;
}

Vec Mesh1D::nodes() const {
  Vec x(n_nodes());
  for (int i = 0; i < n_nodes(); ++i) x(i) = this->x(i);
  return x;
}

Vec SymTridiag::apply(const Vec& v) const {
  const int n = size();
  if (v.size() != n) throw std::invalid_argument("SymTridiag::apply: size mismatch");
  Vec out = diag.cwiseProduct(v);
  if (n > 1) {
    out.head(n - 1) += off.cwiseProduct(v.tail(n - 1));
    out.tail(n - 1) += off.cwiseProduct(v.head(n - 1));
  }
  return out;
}

Eigen::MatrixXd SymTridiag::dense() const {
  const int n = size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) a(i, i) = diag(i);
  for (int i = 0; i + 1 < n; ++i) a(i, i + 1) = a(i + 1, i) = off(i);
  return a;
}

TridiagCholesky::TridiagCholesky(const SymTridiag& a) {
  const int n = a.size();
  d_.resize(n);
  e_.resize(std::max(n - 1, 0));
  for (int i = 0; i < n; ++i) {
    double piv = a.diag(i);
    if (i > 0) {
      e_(i - 1) = a.off(i - 1) / d_(i - 1);
      piv -= e_(i - 1) * e_(i - 1);
    }
    if (!(piv > 0.0)) throw std::runtime_error("tridiagonal Cholesky: matrix not positive definite");
    d_(i) = std::sqrt(piv);
  }
}

Vec TridiagCholesky::solve_L(const Vec& v) const {
  const int n = size();
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    double s = v(i);
    if (i > 0) s -= e_(i - 1) * y(i - 1);
    y(i) = s / d_(i);
  }
  return y;
}

Vec TridiagCholesky::solve_Lt(const Vec& v) const {
  const int n = size();
  Vec x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = v(i);
    if (i + 1 < n) s -= e_(i) * x(i + 1);
    x(i) = s / d_(i);
  }
  return x;
}

Vec TridiagCholesky::solve(const Vec& b) const {
  if (b.size() != size()) throw std::invalid_argument("TridiagCholesky::solve: size mismatch");
  return solve_Lt(solve_L(b));
}

Vec TridiagCholesky::mul_L(const Vec& v) const {
  const int n = size();
  Vec y = d_.cwiseProduct(v);
  if (n > 1) y.tail(n - 1) += e_.cwiseProduct(v.head(n - 1));
  return y;
}

Vec TridiagCholesky::mul_Lt(const Vec& v) const {
  const int n = size();
  Vec y = d_.cwiseProduct(v);
  if (n > 1) y.head(n - 1) += e_.cwiseProduct(v.tail(n - 1));
  return y;
}

namespace {

struct GaussLegendre8 {
  double x[8];  // on [0,1]
  double w[8];
  GaussLegendre8() {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(8), sub(7);
    for (int k = 1; k < 8; ++k) sub(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    for (int i = 0; i < 8; ++i) {
      x[i] = 0.5 * (es.eigenvalues()(i) + 1.0);
      w[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);  // sums to 1 on [0,1]
    }
  }
};

const GaussLegendre8& gl8() {
  static const GaussLegendre8 rule;
  return rule;
}

// Restrict an all-node tridiagonal matrix to the interior block.
SymTridiag interior_block(const SymTridiag& full) {
  const int n = full.size() - 2;
  SymTridiag out;
  out.diag = full.diag.segment(1, n);
  out.off = n > 1 ? Vec(full.off.segment(1, n - 1)) : Vec(0);
  return out;
}

SymTridiag full_matrix(const Mesh1D& mesh, double d_in, double d_bd, double off) {
  SymTridiag a;
  a.diag = Vec::Constant(mesh.n_nodes(), d_in);
  a.diag(0) = a.diag(mesh.n_nodes() - 1) = d_bd;
  a.off = Vec::Constant(mesh.n_cells, off);
  return a;
}

}  // namespace

FemOperator assemble(const Mesh1D& mesh, OperatorKind kind, double beta, double gamma,
                     Boundary bc) {
  const double h = mesh.h;
  SymTridiag mass = full_matrix(mesh, 2.0 * h / 3.0, h / 3.0, h / 6.0);
  SymTridiag lap = full_matrix(mesh, 2.0 / h, 1.0 / h, -1.0 / h);
  FemOperator op;
  op.kind = kind;
  op.boundary = bc;
  switch (kind) {
    case OperatorKind::Mass:
      op.matrix = mass;
      break;
    case OperatorKind::Laplacian:
      op.matrix = lap;
      break;
    case OperatorKind::StiffnessA:
      if (!(beta > 0.0) || gamma < 0.0) {
        throw std::invalid_argument("StiffnessA needs beta > 0 and gamma >= 0");
      }
      op.beta = beta;
      op.gamma = gamma;
      op.matrix.diag = beta * lap.diag + gamma * mass.diag;
      op.matrix.off = beta * lap.off + gamma * mass.off;
      break;
    case OperatorKind::WeightedMass:
      throw std::invalid_argument("use assemble_weighted_mass");
  }
  if (bc == Boundary::Dirichlet) op.matrix = interior_block(op.matrix);
  return op;
}

FemOperator assemble_weighted_mass(const Mesh1D& mesh, const std::function<double(double)>& w,
                                   Boundary bc) {
  const auto& q = gl8();
  const double h = mesh.h;
  SymTridiag a;
  a.diag = Vec::Zero(mesh.n_nodes());
  a.off = Vec::Zero(mesh.n_cells);
  for (int c = 0; c < mesh.n_cells; ++c) {
    double m00 = 0, m01 = 0, m11 = 0;
    for (int k = 0; k < 8; ++k) {
      const double t = q.x[k];
      const double wk = q.w[k] * h * w(mesh.x(c) + t * h);
      m00 += wk * (1 - t) * (1 - t);
      m01 += wk * (1 - t) * t;
      m11 += wk * t * t;
    }
    a.diag(c) += m00;
    a.diag(c + 1) += m11;
    a.off(c) += m01;
  }
  FemOperator op;
  op.kind = OperatorKind::WeightedMass;
  op.boundary = bc;
  op.matrix = bc == Boundary::Dirichlet ? interior_block(a) : a;
  return op;
}

Vec assemble_load(const Mesh1D& mesh, const std::function<double(double)>& w) {
  const auto& q = gl8();
  const double h = mesh.h;
  Vec b = Vec::Zero(mesh.n_nodes());
  for (int c = 0; c < mesh.n_cells; ++c) {
    for (int k = 0; k < 8; ++k) {
      const double t = q.x[k];
      const double wk = q.w[k] * h * w(mesh.x(c) + t * h);
      b(c) += wk * (1 - t);
      b(c + 1) += wk * t;
    }
  }
  return b;
}

FemOperator add(const FemOperator& a, const FemOperator& b, double scale_b) {
  if (a.size() != b.size() || a.boundary != b.boundary) {
    throw std::invalid_argument("FemOperator add: incompatible operators");
  }
  FemOperator out = a;
  out.matrix.diag += scale_b * b.matrix.diag;
  out.matrix.off += scale_b * b.matrix.off;
  return out;
}

AAlpha::AAlpha(FemOperator a, FemOperator m, int alpha)
    : a_(std::move(a)), m_(std::move(m)), alpha_(alpha) {
  if (alpha < 1) throw std::invalid_argument("alpha must be a positive integer");
  if (a_.size() != m_.size()) throw std::invalid_argument("AAlpha: size mismatch");
  a_chol_ = TridiagCholesky(a_.matrix);
  m_chol_ = TridiagCholesky(m_.matrix);
}

Vec AAlpha::apply(const Vec& v) const {
  Vec w = a_.apply(v);
  for (int k = 1; k < alpha_; ++k) w = a_.apply(m_chol_.solve(w));
  return w;
}

Vec AAlpha::apply_inv(const Vec& v) const {
  Vec w = a_chol_.solve(v);
  for (int k = 1; k < alpha_; ++k) w = a_chol_.solve(m_.apply(w));
  return w;
}

Vec apply_A_alpha(const AAlpha& op, const Vec& v) { return op.apply(v); }
Vec apply_A_alpha_inv(const AAlpha& op, const Vec& v) { return op.apply_inv(v); }

PoissonSolver::PoissonSolver(const Mesh1D& mesh)
    : mesh_(mesh),
      k_(assemble(mesh, OperatorKind::Laplacian)),
      m_(assemble(mesh, OperatorKind::Mass)),
      k_chol_(k_.matrix) {}

Vec PoissonSolver::solve(const Vec& m_interior) const {
  return k_chol_.solve(m_.apply(m_interior));
}

Vec solve_poisson(const Vec& m, const Mesh1D& mesh) {
  const int n = mesh.n_interior();
  Vec rhs;
  if (m.size() == mesh.n_nodes()) {
    FemOperator full = assemble(mesh, OperatorKind::Mass, 1.0, 0.0, Boundary::Natural);
    rhs = full.apply(m).segment(1, n);
  } else if (m.size() == n) {
    rhs = assemble(mesh, OperatorKind::Mass).apply(m);
  } else {
    throw std::invalid_argument("solve_poisson: field length matches neither node set");
  }
  TridiagCholesky k(assemble(mesh, OperatorKind::Laplacian).matrix);
  Vec u = Vec::Zero(mesh.n_nodes());
  u.segment(1, n) = k.solve(rhs);
  return u;
}

Vec darcy_coefficients(const Vec& m, const Mesh1D& mesh) {
  if (m.size() != mesh.n_nodes()) throw std::invalid_argument("darcy: m must live on all nodes");
  Vec k(mesh.n_cells);
  for (int c = 0; c < mesh.n_cells; ++c) k(c) = std::exp(0.5 * (m(c) + m(c + 1)));
  return k;
}

SymTridiag darcy_stiffness(const Vec& k, const Mesh1D& mesh) {
  const int n = mesh.n_interior();
  const double h = mesh.h;
  SymTridiag a;
  a.diag.resize(n);
  a.off.resize(std::max(n - 1, 0));
  for (int i = 0; i < n; ++i) a.diag(i) = (k(i) + k(i + 1)) / h;
  for (int i = 0; i + 1 < n; ++i) a.off(i) = -k(i + 1) / h;
  return a;
}

Vec solve_darcy_cells(const Vec& k, const Mesh1D& mesh) {
  if (k.size() != mesh.n_cells) throw std::invalid_argument("darcy: one coefficient per cell");
  for (int c = 0; c < k.size(); ++c) {
    if (!(k(c) > 0.0) || !std::isfinite(k(c))) {
      throw std::runtime_error("darcy: coefficient not positive and finite");
    }
  }
  const int n = mesh.n_interior();
  Vec rhs = Vec::Zero(n);
  rhs(0) = k(0) / mesh.h;  // lifting of u(0) = 1
  TridiagCholesky chol(darcy_stiffness(k, mesh));
  Vec u = Vec::Zero(mesh.n_nodes());
  u(0) = 1.0;
  u.segment(1, n) = chol.solve(rhs);
  return u;
}

Vec solve_darcy(const Vec& m, const Mesh1D& mesh) {
  return solve_darcy_cells(darcy_coefficients(m, mesh), mesh);
}

}  // namespace hsq
