#include "hsq/gaussian_measure.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

using namespace hsq;
using std::numbers::pi;

namespace {

AAlpha laplacian_prior(const Mesh1D& mesh, double beta, int alpha) {
  return AAlpha(assemble(mesh, OperatorKind::StiffnessA, beta, 0.0), assemble(mesh, OperatorKind::Mass), alpha);
}

}  // namespace

TEST_SUITE("gaussian_measure") {
  TEST_CASE("analytic prior spectrum") {
    const Mesh1D mesh = Mesh1D::uniform(10);
    const auto c = prior_eigen_analytic(5e-2, 1, 40, mesh, AnalyticSpectrum::Continuous);
    CHECK(c.values(0) == doctest::Approx(1.0 / (0.05 * pi * pi)).epsilon(1e-14));
    CHECK(c.values(0) == doctest::Approx(2.02642).epsilon(1e-5));
    const auto c2 = prior_eigen_analytic(5e-2, 2, 40, mesh, AnalyticSpectrum::Continuous);
    const double slope1 = std::log(c.values(39) / c.values(9)) / std::log(4.0);
    const double slope2 = std::log(c2.values(39) / c2.values(9)) / std::log(4.0);
    CHECK(slope1 == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(slope2 == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(is_descending(c));
    const auto mass = assemble(mesh, OperatorKind::Mass);
    const auto d = prior_eigen_analytic(5e-2, 1, 60, mesh);
    CHECK(b_orthonormality_error(d, [&mass](const Vec& v) { return mass.apply(v); }) < 1e-8);
    CHECK_THROWS_AS(prior_eigen_analytic(5e-2, 1, mesh.n_interior() + 1, mesh), std::invalid_argument);
  }

  TEST_CASE("discrete eigenvalue solves the P1 pencil exactly") {
    const Mesh1D mesh = Mesh1D::uniform(6);
    const auto k = assemble(mesh, OperatorKind::Laplacian);
    const auto m = assemble(mesh, OperatorKind::Mass);
    for (int j : {1, 7, 30}) {
      Vec psi(mesh.n_interior());
      for (int i = 0; i < psi.size(); ++i) psi(i) = std::sin(j * pi * mesh.x(i + 1));
      const double mu = discrete_laplacian_eigenvalue(j, mesh);
      CHECK((k.apply(psi) - mu * m.apply(psi)).norm() < 1e-9 * mu * psi.norm());
    }
  }

  TEST_CASE("numeric prior spectrum matches the analytic one") {
    const Mesh1D mesh = Mesh1D::uniform(8);
    for (int alpha : {1, 2}) {
      const AAlpha op = laplacian_prior(mesh, 5e-2, alpha);
      const auto num = prior_eigen_numeric(op, 20);
      const auto exact = prior_eigen_analytic(5e-2, alpha, 20, mesh);
      const auto cont = prior_eigen_analytic(5e-2, alpha, 20, mesh, AnalyticSpectrum::Continuous);
      REQUIRE(num.count() == 20);
      for (int j = 0; j < 20; ++j) CHECK(num.values(j) == doctest::Approx(exact.values(j)).epsilon(1e-3));
      for (int j = 0; j < 5; ++j) CHECK(num.values(j) == doctest::Approx(cont.values(j)).epsilon(1e-3));
      CHECK(is_descending(num));
      CHECK(b_orthonormality_error(num, [&op](const Vec& v) { return op.apply_mass(v); }) < 1e-10);
    }
  }

  TEST_CASE("randomized eigensolver oracles") {
    Mat d = Mat::Zero(3, 3);
    d.diagonal() << 3.0, 2.0, 1.0;
    const auto e = randomized_eigen([&d](const Vec& v) { return Vec(d * v); }, identity_factor(3), 2);
    REQUIRE(e.count() == 2);
    CHECK(e.values(0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e.values(1) == doctest::Approx(2.0).epsilon(1e-12));

    const Mesh1D mesh = Mesh1D::uniform(5);
    const auto m = assemble(mesh, OperatorKind::Mass);
    const auto B = mass_factor(laplacian_prior(mesh, 1.0, 1));
    const auto ones = randomized_eigen([&m](const Vec& v) { return m.apply(v); }, B, 10);
    for (int j = 0; j < ones.count(); ++j) CHECK(ones.values(j) == doctest::Approx(1.0).epsilon(1e-10));

    // Rank deficiency is reported, not hidden.
    Mat r = Mat::Zero(4, 4);
    r(0, 0) = 1.0;
    const auto def = randomized_eigen([&r](const Vec& v) { return Vec(r * v); }, identity_factor(4), 3);
    CHECK(def.rank_deficient);
    CHECK(def.count() == 1);
  }

  TEST_CASE("prior operator: randomized top-10 matches a dense solve") {
    const Mesh1D mesh = Mesh1D::uniform(8);
    const AAlpha op = laplacian_prior(mesh, 5e-2, 2);
    const int n = op.size();
    const auto num = prior_eigen_numeric(op, 10);
    Mat A(n, n);
    for (int j = 0; j < n; ++j) A.col(j) = op.apply_mass(op.apply_inv(op.apply_mass(Vec::Unit(n, j))));
    A = 0.5 * (A + A.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(A, op.mass().matrix.dense());
    const Vec want = es.eigenvalues().reverse();
    for (int j = 0; j < 10; ++j) CHECK(num.values(j) == doctest::Approx(want(j)).epsilon(1e-8));
  }

  TEST_CASE("dense factor and a_alpha factor reproduce B") {
    const Mesh1D mesh = Mesh1D::uniform(4);
    for (int alpha : {1, 2, 3}) {
      const AAlpha op = laplacian_prior(mesh, 0.3, alpha);
      const SymFactor f = a_alpha_factor(op);
      Vec v = Vec::LinSpaced(op.size(), -1.0, 2.0);
      CHECK((f.apply_B(v) - op.apply(v)).norm() <= 1e-10 * op.apply(v).norm());
      CHECK((f.Finv(f.F(v)) - v).norm() <= 1e-10 * v.norm());
      CHECK((f.Ftinv(f.Ft(v)) - v).norm() <= 1e-10 * v.norm());
    }
    Mat b(2, 2);
    b << 2.0, 0.5, 0.5, 1.0;
    const SymFactor f = dense_factor(b);
    const Vec v = Vec::Ones(2);
    CHECK((f.apply_B(v) - b * v).norm() < 1e-14);
  }

  TEST_CASE("kl_map") {
    const Mesh1D mesh = Mesh1D::uniform(6);
    const auto pairs = prior_eigen_analytic(5e-2, 1, 10, mesh);
    const Vec mean = (pi * mesh.nodes().segment(1, mesh.n_interior())).array().cos();
    const GaussianField f(mean, pairs);
    CHECK(kl_map(f, {}) == mean);
    const Vec e1 = kl_map(f, {{1, 1.0}});
    CHECK((e1 - mean - std::sqrt(pairs.values(0)) * pairs.vectors.col(0)).cwiseAbs().maxCoeff() < 1e-15);
    const SparsePoint a = {{1, 0.3}, {4, -1.2}};
    const SparsePoint b = {{2, 0.7}, {4, 0.5}, {9, 2.0}};
    const SparsePoint ab = {{1, 0.3}, {2, 0.7}, {4, -0.7}, {9, 2.0}};
    const Vec affine = kl_map(f, ab) - kl_map(f, a) - kl_map(f, b) + mean;
    CHECK(affine.cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(kl_map(f, {{11, 1.0}}), std::out_of_range);
    CHECK_THROWS_AS(GaussianField(mean, pairs, 11), std::invalid_argument);
    const GaussianField truncated(mean, pairs, 3);
    CHECK_THROWS_AS(truncated.map({{4, 1.0}}), std::out_of_range);
  }

  TEST_CASE("sample covariance at x = 0.5") {
    const Mesh1D mesh = Mesh1D::uniform(8);
    const auto pairs = prior_eigen_analytic(5e-2, 1, 50, mesh);
    const GaussianField f(Vec::Zero(mesh.n_interior()), pairs);
    const int mid = mesh.n_cells / 2 - 1;
    double want = 0.0;
    for (int j = 0; j < 50; ++j) want += pairs.values(j) * std::pow(pairs.vectors(mid, j), 2);
    Rng rng(2024);
    double s2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) s2 += std::pow(f.sample(rng)(mid), 2);
    CHECK(s2 / n == doctest::Approx(want).epsilon(0.05));
    // project() gives the same variance in closed form.
    CHECK(f.project(Vec::Unit(mesh.n_interior(), mid)).squaredNorm() == doctest::Approx(want).epsilon(1e-12));
  }

  TEST_CASE("rng is reproducible and splits into independent streams") {
    Rng a(7), b(7), c(8);
    for (int i = 0; i < 5; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng(7).next_u64() != c.next_u64());
    CHECK(Rng(7).split(1).next_u64() != Rng(7).split(2).next_u64());
    Rng n(3);
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const double x = n.normal();
      s += x;
      s2 += x * x;
    }
    CHECK(std::abs(s / 20000) < 0.03);
    CHECK(s2 / 20000 == doctest::Approx(1.0).epsilon(0.03));
  }
}
