#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace hsq {

using Vec = Eigen::VectorXd;

// Uniform mesh of (0,1) with 2^L cells.
struct Mesh1D {
  int exponent = 0;
  int n_cells = 1;
  double h = 1.0;

  static Mesh1D uniform(int exponent);
  int n_nodes() const { return n_cells + 1; }
  int n_interior() const { return n_cells - 1; }
  double x(int node) const { return node * h; }
  Vec nodes() const;
};

// Dirichlet: unknowns are the interior nodes. Natural: all nodes.
enum class Boundary { Dirichlet, Natural };

struct SymTridiag {
  Vec diag;
  Vec off;  // off(i) couples i and i+1

  int size() const { return static_cast<int>(diag.size()); }
  Vec apply(const Vec& v) const;
  Eigen::MatrixXd dense() const;
};

// Cholesky factor L (lower bidiagonal) of an SPD tridiagonal matrix.
// All methods are const, so one factor can serve concurrent solves.
class TridiagCholesky {
 public:
  TridiagCholesky() = default;
  explicit TridiagCholesky(const SymTridiag& a);

  int size() const { return static_cast<int>(d_.size()); }
  Vec solve(const Vec& b) const;
  Vec mul_L(const Vec& v) const;
  Vec mul_Lt(const Vec& v) const;
  Vec solve_L(const Vec& v) const;
  Vec solve_Lt(const Vec& v) const;

 private:
  Vec d_;  // diagonal of L
  Vec e_;  // subdiagonal of L
};

enum class OperatorKind { Mass, Laplacian, StiffnessA, WeightedMass };

struct FemOperator {
  SymTridiag matrix;
  OperatorKind kind = OperatorKind::Mass;
  Boundary boundary = Boundary::Dirichlet;
  double beta = 0.0;
  double gamma = 0.0;

  Vec apply(const Vec& v) const { return matrix.apply(v); }
  int size() const { return matrix.size(); }
};

// Exact P1 matrices. StiffnessA = beta·Laplacian + gamma·Mass.
FemOperator assemble(const Mesh1D& mesh, OperatorKind kind, double beta = 1.0, double gamma = 0.0,
                     Boundary bc = Boundary::Dirichlet);

// ∫ w(x) φ_i φ_j dx with 8-point Gauss–Legendre per cell.
FemOperator assemble_weighted_mass(const Mesh1D& mesh, const std::function<double(double)>& w,
                                   Boundary bc = Boundary::Dirichlet);

// ∫ w(x) φ_i dx over all nodes, 8-point Gauss–Legendre per cell.
Vec assemble_load(const Mesh1D& mesh, const std::function<double(double)>& w);

FemOperator add(const FemOperator& a, const FemOperator& b, double scale_b = 1.0);

// 𝔸_α = (𝔸𝕄⁻¹)^{α−1}𝔸 for integer α ≥ 1, with factor-once solves.
class AAlpha {
 public:
  AAlpha(FemOperator a, FemOperator m, int alpha);

  int alpha() const { return alpha_; }
  int size() const { return a_.size(); }
  const FemOperator& a() const { return a_; }
  const FemOperator& mass() const { return m_; }
  const TridiagCholesky& a_factor() const { return a_chol_; }
  const TridiagCholesky& mass_factor() const { return m_chol_; }

  Vec apply(const Vec& v) const;
  Vec apply_inv(const Vec& v) const;
  Vec apply_mass(const Vec& v) const { return m_.apply(v); }
  Vec solve_mass(const Vec& v) const { return m_chol_.solve(v); }

 private:
  FemOperator a_;
  FemOperator m_;
  int alpha_;
  TridiagCholesky a_chol_;
  TridiagCholesky m_chol_;
};

Vec apply_A_alpha(const AAlpha& op, const Vec& v);
Vec apply_A_alpha_inv(const AAlpha& op, const Vec& v);

// −u'' = m, u(0) = u(1) = 0, load 𝕄m. Accepts m on all nodes or on the
// interior nodes only (boundary values then taken as 0). Returns u on all nodes.
Vec solve_poisson(const Vec& m, const Mesh1D& mesh);

// Reusable factorization of the Dirichlet Laplacian.
class PoissonSolver {
 public:
  explicit PoissonSolver(const Mesh1D& mesh);
  const Mesh1D& mesh() const { return mesh_; }
  const FemOperator& stiffness() const { return k_; }
  const FemOperator& mass() const { return m_; }
  // Interior unknowns: u = 𝕂⁻¹𝕄m.
  Vec solve(const Vec& m_interior) const;
  Vec solve_stiffness(const Vec& rhs) const { return k_chol_.solve(rhs); }

 private:
  Mesh1D mesh_;
  FemOperator k_;
  FemOperator m_;
  TridiagCholesky k_chol_;
};

// exp of the mean of m over each cell (midpoint rule). m has n_nodes entries.
Vec darcy_coefficients(const Vec& m, const Mesh1D& mesh);

// Interior stiffness matrix of −(k u')' with piecewise constant k.
SymTridiag darcy_stiffness(const Vec& k_cells, const Mesh1D& mesh);

// −(e^m u')' = 0, u(0) = 1, u(1) = 0. Returns u on all nodes.
Vec solve_darcy(const Vec& m, const Mesh1D& mesh);
Vec solve_darcy_cells(const Vec& k_cells, const Mesh1D& mesh);

}  // namespace hsq
