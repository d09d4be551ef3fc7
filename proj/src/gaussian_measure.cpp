#include "hsq/gaussian_measure.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hsq {

EigenPairs EigenPairs::head(int J) const {
  if (J > count()) throw std::invalid_argument("EigenPairs::head: not enough pairs");
  EigenPairs out;
  out.values = values.head(J);
  out.vectors = vectors.leftCols(J);
  out.rank_deficient = rank_deficient;
  return out;
}

SymFactor identity_factor(int n) {
  auto id = [](const Vec& v) { return v; };
  return {n, id, id, id, id};
}

SymFactor dense_factor(const Mat& b) {
  auto llt = std::make_shared<Eigen::LLT<Mat>>(b);
  if (llt->info() != Eigen::Success) throw std::invalid_argument("dense_factor: B not SPD");
  SymFactor f;
  f.n = static_cast<int>(b.rows());
  f.F = [llt](const Vec& v) { return Vec(llt->matrixL() * v); };
  f.Ft = [llt](const Vec& v) { return Vec(llt->matrixU() * v); };
  f.Finv = [llt](const Vec& v) { return Vec(llt->matrixL().solve(v)); };
  f.Ftinv = [llt](const Vec& v) { return Vec(llt->matrixU().solve(v)); };
  return f;
}

SymFactor mass_factor(const AAlpha& op) {
  // The closures own a copy, so the factor may outlive `op`.
  auto l = std::make_shared<const TridiagCholesky>(op.mass_factor());
  SymFactor f;
  f.n = op.size();
  f.F = [l](const Vec& v) { return l->mul_L(v); };
  f.Ft = [l](const Vec& v) { return l->mul_Lt(v); };
  f.Finv = [l](const Vec& v) { return l->solve_L(v); };
  f.Ftinv = [l](const Vec& v) { return l->solve_Lt(v); };
  return f;
}

SymFactor a_alpha_factor(const AAlpha& op) {
  // α = 2k+1: F = (𝔸𝕄⁻¹)^k L_A.   α = 2k: F = (𝔸𝕄⁻¹)^{k−1} 𝔸 L_M⁻ᵀ.
  auto a = std::make_shared<const AAlpha>(op);
  const int alpha = op.alpha();
  const bool odd = alpha % 2 == 1;
  const int k = odd ? (alpha - 1) / 2 : alpha / 2 - 1;

  auto am = [a](Vec v) { return a->a().apply(a->solve_mass(v)); };           // 𝔸𝕄⁻¹
  auto ma = [a](Vec v) { return a->apply_mass(a->a_factor().solve(v)); };    // 𝕄𝔸⁻¹ = (𝔸𝕄⁻¹)⁻¹
  auto mi_a = [a](Vec v) { return a->solve_mass(a->a().apply(v)); };         // (𝔸𝕄⁻¹)ᵀ
  auto ai_m = [a](Vec v) { return a->a_factor().solve(a->apply_mass(v)); };  // (𝕄𝔸⁻¹)ᵀ

  SymFactor f;
  f.n = op.size();
  f.F = [=](const Vec& v) {
    Vec w = odd ? a->a_factor().mul_L(v) : a->a().apply(a->mass_factor().solve_Lt(v));
    for (int i = 0; i < k; ++i) w = am(w);
    return w;
  };
  f.Ft = [=](const Vec& v) {
    Vec w = v;
    for (int i = 0; i < k; ++i) w = mi_a(w);
    return odd ? a->a_factor().mul_Lt(w) : a->mass_factor().solve_L(a->a().apply(w));
  };
  f.Finv = [=](const Vec& v) {
    Vec w = v;
    for (int i = 0; i < k; ++i) w = ma(w);
    return odd ? a->a_factor().solve_L(w) : a->mass_factor().mul_Lt(a->a_factor().solve(w));
  };
  f.Ftinv = [=](const Vec& v) {
    Vec w = odd ? a->a_factor().solve_Lt(v) : a->a_factor().solve(a->mass_factor().mul_L(v));
    for (int i = 0; i < k; ++i) w = ai_m(w);
    return w;
  };
  return f;
}

EigenPairs randomized_eigen(const LinOp& apply_A, const SymFactor& B, int J,
                            const RandomizedOptions& opts) {
  const int n = B.n;
  if (J < 1) throw std::invalid_argument("randomized_eigen: J must be >= 1");
  if (J > n) throw std::invalid_argument("randomized_eigen: J exceeds the problem size");
  const int ell = std::min(n, J + std::max(opts.oversampling, 0));

  auto apply_S = [&](const Mat& x) {
    Mat y(n, x.cols());
    for (int c = 0; c < x.cols(); ++c) {
      Vec col = B.Finv(apply_A(B.Ftinv(x.col(c))));
      if (!col.allFinite()) throw std::runtime_error("randomized_eigen: operator produced non-finite values");
      y.col(c) = col;
    }
    return y;
  };
  auto orthonormal = [&](const Mat& y) {
    Eigen::HouseholderQR<Mat> qr(y);
    return Mat(qr.householderQ() * Mat::Identity(n, y.cols()));
  };

  Rng rng(opts.seed);
  Mat omega(n, ell);
  for (int c = 0; c < ell; ++c) {
    for (int r = 0; r < n; ++r) omega(r, c) = rng.normal();
  }
  Mat q = orthonormal(apply_S(omega));
  for (int it = 0; it < opts.power_iters && ell < n; ++it) q = orthonormal(apply_S(q));

  Mat sq = apply_S(q);
  Mat t = q.transpose() * sq;
  t = 0.5 * (t + t.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(t);
  if (es.info() != Eigen::Success) throw std::runtime_error("randomized_eigen: small eigensolve failed");

  // Eigen returns ascending order.
  const Vec& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  std::vector<int> order(static_cast<std::size_t>(ell));
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](int i) { return opts.by_magnitude ? std::abs(ev(i)) : ev(i); };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) > key(b); });
  std::vector<int> keep;
  for (int i : order) {
    if (static_cast<int>(keep.size()) == J) break;
    if (key(i) > opts.drop_tol * top) keep.push_back(i);
  }
  std::sort(keep.begin(), keep.end(), [&](int a, int b) { return ev(a) > ev(b); });
  EigenPairs out;
  out.rank_deficient = static_cast<int>(keep.size()) < J;
  out.values.resize(static_cast<int>(keep.size()));
  out.vectors.resize(n, static_cast<int>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const int i = keep[c];
    out.values(static_cast<int>(c)) = ev(i);
    out.vectors.col(static_cast<int>(c)) = B.Ftinv(q * es.eigenvectors().col(i));
  }
  return out;
}

double discrete_laplacian_eigenvalue(int j, const Mesh1D& mesh) {
  const double theta = j * std::numbers::pi * mesh.h;
  const double c = std::cos(theta);
  return 6.0 * (1.0 - c) / (mesh.h * mesh.h * (2.0 + c));
}

EigenPairs prior_eigen_analytic(double beta, int alpha, int J, const Mesh1D& mesh,
                                AnalyticSpectrum kind) {
  if (!(beta > 0.0) || alpha < 1) throw std::invalid_argument("prior_eigen_analytic: bad parameters");
  const int n = mesh.n_interior();
  if (J < 1 || J > n) throw std::invalid_argument("prior_eigen_analytic: J out of range");
  const FemOperator mass = assemble(mesh, OperatorKind::Mass);
  EigenPairs out;
  out.values.resize(J);
  out.vectors.resize(n, J);
  for (int j = 1; j <= J; ++j) {
    const double mu = kind == AnalyticSpectrum::Continuous
                          ? std::numbers::pi * std::numbers::pi * j * j
                          : discrete_laplacian_eigenvalue(j, mesh);
    out.values(j - 1) = std::pow(beta * mu, -alpha);
    Vec psi(n);
    for (int i = 0; i < n; ++i) psi(i) = std::sqrt(2.0) * std::sin(j * std::numbers::pi * mesh.x(i + 1));
    psi /= std::sqrt(psi.dot(mass.apply(psi)));
    out.vectors.col(j - 1) = psi;
  }
  return out;
}

EigenPairs prior_eigen_numeric(const AAlpha& op, int J, const RandomizedOptions& opts) {
  SymFactor m = mass_factor(op);
  auto apply = [&op](const Vec& v) { return op.apply_mass(op.apply_inv(op.apply_mass(v))); };
  return randomized_eigen(apply, m, J, opts);
}

GaussianField::GaussianField(Vec mean_, EigenPairs basis_, int truncation_)
    : mean(std::move(mean_)), basis(std::move(basis_)) {
  truncation = truncation_ < 0 ? basis.count() : truncation_;
  if (truncation > basis.count()) {
    throw std::invalid_argument("GaussianField: truncation exceeds available eigenpairs");
  }
  if (basis.count() > 0 && basis.vectors.rows() != mean.size()) {
    throw std::invalid_argument("GaussianField: mean and basis sizes differ");
  }
}

Vec GaussianField::map(const SparsePoint& xi) const {
  Vec m = mean;
  for (auto [j, x] : xi) {
    if (j < 1 || j > truncation) {
      throw std::out_of_range("kl_map: coordinate " + std::to_string(j) + " beyond truncation " +
                              std::to_string(truncation));
    }
    m += (std::sqrt(basis.values(j - 1)) * x) * basis.vectors.col(j - 1);
  }
  return m;
}

Vec GaussianField::map_dense(const Vec& xi) const {
  if (xi.size() > truncation) throw std::out_of_range("kl_map: too many coordinates");
  const int J = static_cast<int>(xi.size());
  return mean + basis.vectors.leftCols(J) *
                    (basis.values.head(J).cwiseSqrt().cwiseProduct(xi));
}

Vec GaussianField::sample(Rng& rng) const {
  Vec xi(truncation);
  for (int j = 0; j < truncation; ++j) xi(j) = rng.normal();
  return map_dense(xi);
}

Vec GaussianField::project(const Vec& ell) const {
  const int J = truncation;
  return basis.values.head(J).cwiseSqrt().cwiseProduct(basis.vectors.leftCols(J).transpose() * ell);
}

Vec kl_map(const GaussianField& field, const SparsePoint& xi) { return field.map(xi); }

double b_orthonormality_error(const EigenPairs& e, const LinOp& apply_B) {
  const int J = e.count();
  Mat bv(e.vectors.rows(), J);
  for (int c = 0; c < J; ++c) bv.col(c) = apply_B(e.vectors.col(c));
  Mat g = e.vectors.transpose() * bv;
  return (g - Mat::Identity(J, J)).cwiseAbs().maxCoeff();
}

bool is_descending(const EigenPairs& e) {
  for (int i = 1; i < e.count(); ++i) {
    if (e.values(i) > e.values(i - 1)) return false;
  }
  return true;
}

}  // namespace hsq
