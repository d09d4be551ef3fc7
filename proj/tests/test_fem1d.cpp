#include "hsq/fem1d.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

using namespace hsq;
using std::numbers::pi;

namespace {

Vec random_vec(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(gen);
  return v;
}

Vec interior_nodes(const Mesh1D& mesh) { return mesh.nodes().segment(1, mesh.n_interior()); }

}  // namespace

TEST_SUITE("fem1d") {
  TEST_CASE("mesh bookkeeping") {
    const Mesh1D m = Mesh1D::uniform(3);
    CHECK(m.n_cells == 8);
    CHECK(m.n_nodes() == 9);
    CHECK(m.n_interior() == 7);
    CHECK(m.h == 0.125);
    CHECK(m.x(8) == 1.0);
    CHECK_THROWS_AS(Mesh1D::uniform(0), std::invalid_argument);
  }

  TEST_CASE("stencils by hand on h = 1/2") {
    const Mesh1D m = Mesh1D::uniform(1);
    const auto mass = assemble(m, OperatorKind::Mass);
    REQUIRE(mass.size() == 1);
    CHECK(mass.matrix.diag(0) == doctest::Approx(1.0 / 3.0));
    const auto lap = assemble(m, OperatorKind::Laplacian);
    CHECK(lap.matrix.diag(0) == doctest::Approx(4.0));
    const auto a = assemble(m, OperatorKind::StiffnessA, 1.0, 0.0);
    CHECK(a.matrix.diag(0) == lap.matrix.diag(0));

    const Mesh1D m3 = Mesh1D::uniform(3);
    const auto mass3 = assemble(m3, OperatorKind::Mass);
    CHECK(mass3.matrix.diag(2) == doctest::Approx(2.0 * m3.h / 3.0));
    CHECK(mass3.matrix.off(2) == doctest::Approx(m3.h / 6.0));
    const auto natural = assemble(m3, OperatorKind::Mass, 1.0, 0.0, Boundary::Natural);
    CHECK(natural.size() == 9);
    CHECK(natural.matrix.diag(0) == doctest::Approx(m3.h / 3.0));
    const auto lapn = assemble(m3, OperatorKind::Laplacian, 1.0, 0.0, Boundary::Natural);
    CHECK(lapn.apply(Vec::Ones(9)).norm() < 1e-12);  // constants in the kernel
    const auto combo = assemble(m3, OperatorKind::StiffnessA, 2.0, 3.0);
    const auto lap3 = assemble(m3, OperatorKind::Laplacian);
    CHECK((combo.matrix.diag - (2.0 * lap3.matrix.diag + 3.0 * mass3.matrix.diag)).norm() < 1e-12);
  }

  TEST_CASE("operators are symmetric positive definite") {
    for (int L : {2, 4, 6}) {
      const Mesh1D m = Mesh1D::uniform(L);
      for (auto bc : {Boundary::Dirichlet, Boundary::Natural}) {
        std::vector<FemOperator> ops = {assemble(m, OperatorKind::Mass, 1.0, 0.0, bc),
                                        assemble(m, OperatorKind::StiffnessA, 2.0, 1.0, bc),
                                        assemble_weighted_mass(m, [](double x) { return 1.0 + x * x; }, bc)};
        if (bc == Boundary::Dirichlet) ops.push_back(assemble(m, OperatorKind::Laplacian));
        for (const auto& op : ops) {
          const Eigen::MatrixXd a = op.matrix.dense();
          CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
          CHECK(es.eigenvalues().minCoeff() > 0.0);
        }
      }
    }
  }

  TEST_CASE("weighted mass with w = 1 is the mass matrix; load integrates exactly") {
    const Mesh1D m = Mesh1D::uniform(4);
    const auto w1 = assemble_weighted_mass(m, [](double) { return 1.0; });
    const auto mass = assemble(m, OperatorKind::Mass);
    CHECK((w1.matrix.diag - mass.matrix.diag).norm() < 1e-14);
    CHECK((w1.matrix.off - mass.matrix.off).norm() < 1e-14);
    const Vec load = assemble_load(m, [](double x) { return x; });
    CHECK(load.sum() == doctest::Approx(0.5).epsilon(1e-14));
  }

  TEST_CASE("tridiagonal Cholesky") {
    const Mesh1D m = Mesh1D::uniform(5);
    const auto a = assemble(m, OperatorKind::StiffnessA, 0.3, 2.0);
    const TridiagCholesky c(a.matrix);
    const Vec b = random_vec(a.size(), 1);
    CHECK((a.apply(c.solve(b)) - b).norm() < 1e-12 * b.norm());
    CHECK((c.mul_L(c.mul_Lt(b)) - a.apply(b)).norm() < 1e-12 * a.apply(b).norm());
    CHECK((c.solve_L(c.mul_L(b)) - b).norm() < 1e-12 * b.norm());
    CHECK((c.solve_Lt(c.mul_Lt(b)) - b).norm() < 1e-12 * b.norm());
    SymTridiag bad{Vec::Constant(3, -1.0), Vec::Zero(2)};
    CHECK_THROWS(TridiagCholesky{bad});
  }

  TEST_CASE("A_alpha") {
    const Mesh1D m = Mesh1D::uniform(6);
    const auto a = assemble(m, OperatorKind::StiffnessA, 0.5, 1.0);
    const auto mass = assemble(m, OperatorKind::Mass);
    const Vec v = random_vec(a.size(), 2);
    const AAlpha a1(a, mass, 1);
    CHECK((a1.apply(v) - a.apply(v)).norm() < 1e-13 * a.apply(v).norm());
    const AAlpha a2(a, mass, 2);
    const Vec comp = a.apply(TridiagCholesky(mass.matrix).solve(a.apply(v)));
    CHECK((a2.apply(v) - comp).norm() < 1e-10 * comp.norm());
    for (int alpha : {1, 2, 3}) {
      const AAlpha op(a, mass, alpha);
      // Round-off grows with the condition number, roughly (12 / (pi h)^2)^alpha.
      const double tol = 1e-14 * std::pow(12.0 / std::pow(pi * m.h, 2), alpha);
      const Vec back = apply_A_alpha(op, apply_A_alpha_inv(op, v));
      CHECK((back - v).norm() <= tol * v.norm());
      const Vec fwd = apply_A_alpha_inv(op, apply_A_alpha(op, v));
      CHECK((fwd - v).norm() <= tol * v.norm());
      CHECK(v.dot(op.apply_inv(v)) > 0.0);
      // Symmetry of the inverse.
      const Vec w = random_vec(a.size(), 9);
      CHECK(w.dot(op.apply_inv(v)) == doctest::Approx(v.dot(op.apply_inv(w))).epsilon(1e-10));
    }
    CHECK_THROWS_AS(AAlpha(a, mass, 0), std::invalid_argument);
  }

  TEST_CASE("Poisson examples") {
    const Mesh1D m = Mesh1D::uniform(6);
    CHECK(solve_poisson(Vec::Zero(m.n_nodes()), m).norm() == 0.0);
    const Vec u1 = solve_poisson(Vec::Ones(m.n_nodes()), m);
    CHECK(u1(m.n_cells / 2) == doctest::Approx(0.125).epsilon(1e-3));
    CHECK(u1(0) == 0.0);
    CHECK(u1(m.n_cells) == 0.0);
    // Interior-only input gives the same as all-node input with zero ends.
    const Vec x = interior_nodes(m);
    const Vec f = (pi * x).array().sin();
    Vec full = Vec::Zero(m.n_nodes());
    full.segment(1, m.n_interior()) = f;
    CHECK((solve_poisson(f, m) - solve_poisson(full, m)).norm() < 1e-14);
    const PoissonSolver ps(m);
    CHECK((ps.solve(f) - solve_poisson(f, m).segment(1, m.n_interior())).norm() < 1e-14);
  }

  TEST_CASE("Poisson converges at second order") {
    double prev = 0.0;
    for (int L = 3; L <= 7; ++L) {
      const Mesh1D m = Mesh1D::uniform(L);
      const Vec x = m.nodes();
      const Vec f = (pi * x).array().sin();
      const Vec u = solve_poisson(f, m);
      const double err = (u - f / (pi * pi)).cwiseAbs().maxCoeff();
      if (L > 3) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.05));
      prev = err;
    }
  }

  TEST_CASE("Darcy examples") {
    const Mesh1D m = Mesh1D::uniform(5);
    const Vec x = m.nodes();
    const Vec lin = Vec::Ones(m.n_nodes()) - x;
    CHECK((solve_darcy(Vec::Zero(m.n_nodes()), m) - lin).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((solve_darcy(Vec::Constant(m.n_nodes(), 1.7), m) - lin).cwiseAbs().maxCoeff() < 1e-13);

    // k = 1 on the left half, 2 on the right: u(0.5) = 1/3 from flux continuity.
    Vec k(m.n_cells);
    for (int c = 0; c < m.n_cells; ++c) k(c) = c < m.n_cells / 2 ? 1.0 : 2.0;
    const Vec u = solve_darcy_cells(k, m);
    CHECK(u(m.n_cells / 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
    CHECK(u(0) == 1.0);
    CHECK(u(m.n_cells) == 0.0);
    // Same setting through nodal m; the node at 0.5 splits the jump across two cells.
    Vec mstep(m.n_nodes());
    for (int i = 0; i < m.n_nodes(); ++i) mstep(i) = x(i) < 0.5 ? 0.0 : (x(i) > 0.5 ? std::log(2.0) : 0.5 * std::log(2.0));
    CHECK(solve_darcy(mstep, m)(m.n_cells / 2) == doctest::Approx(1.0 / 3.0).epsilon(0.02));

    const Vec kc = darcy_coefficients(mstep, m);
    CHECK(kc(0) == 1.0);
    CHECK(kc(m.n_cells - 1) == doctest::Approx(2.0));
    CHECK_THROWS_AS(darcy_coefficients(Vec::Zero(3), m), std::invalid_argument);
  }
}
