#pragma once

#include "hsq/fem1d.hpp"
#include "hsq/random.hpp"
#include "hsq/sparse_quad.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>

namespace hsq {

using Mat = Eigen::MatrixXd;
using LinOp = std::function<Vec(const Vec&)>;

// Descending eigenvalues with B-orthonormal eigenvectors stored as columns.
struct EigenPairs {
  Vec values;
  Mat vectors;
  bool rank_deficient = false;

  int count() const { return static_cast<int>(values.size()); }
  EigenPairs head(int J) const;
};

// B = F Fᵀ, given through the four actions the randomized solver needs.
struct SymFactor {
  int n = 0;
  LinOp F, Ft, Finv, Ftinv;
  Vec apply_B(const Vec& v) const { return F(Ft(v)); }
};

SymFactor identity_factor(int n);
SymFactor dense_factor(const Mat& b);  // dense Cholesky, for small problems and tests
SymFactor mass_factor(const AAlpha& op);
SymFactor a_alpha_factor(const AAlpha& op);

struct RandomizedOptions {
  int oversampling = 10;
  int power_iters = 1;
  std::uint64_t seed = 20180101;
  double drop_tol = 1e-14;  // relative to the largest |λ|
  // Rank and keep pairs by |λ|, for indefinite A. Output is still descending in λ.
  bool by_magnitude = false;
};

// Dominant pairs of A ψ = λ B ψ for symmetric A. Pairs below the drop tolerance
// are discarded and rank_deficient is set.
EigenPairs randomized_eigen(const LinOp& apply_A, const SymFactor& B, int J,
                            const RandomizedOptions& opts = {});

enum class AnalyticSpectrum { Continuous, Discrete };

// Prior (β·(−Δ))^{−α} on the interior nodes. Continuous uses (βπ²j²)^{−α}; Discrete
// uses the P1 generalized eigenvalues, which the sampled √2 sin(jπx) vectors match
// exactly. Vectors are rescaled to unit 𝕄-norm.
EigenPairs prior_eigen_analytic(double beta, int alpha, int J, const Mesh1D& mesh,
                                AnalyticSpectrum kind = AnalyticSpectrum::Discrete);

// Eigenvalue of the P1 Dirichlet Laplacian pencil (𝕂, 𝕄) for sin(jπx).
double discrete_laplacian_eigenvalue(int j, const Mesh1D& mesh);

// 𝕄𝔸_α⁻¹𝕄 ψ = λ 𝕄 ψ.
EigenPairs prior_eigen_numeric(const AAlpha& op, int J, const RandomizedOptions& opts = {});

struct GaussianField {
  Vec mean;
  EigenPairs basis;
  int truncation = 0;

  GaussianField() = default;
  GaussianField(Vec mean, EigenPairs basis, int truncation = -1);

  // kl_map(ξ) = mean + Σ √λ_j ψ_j ξ_j. Throws for j > truncation.
  Vec map(const SparsePoint& xi) const;
  Vec map_dense(const Vec& xi) const;
  Vec sample(Rng& rng) const;
  // (√λ_j ψ_j)ᵀ ℓ for every active j.
  Vec project(const Vec& ell) const;
};

Vec kl_map(const GaussianField& field, const SparsePoint& xi);

// max |ψᵀBψ − I|.
double b_orthonormality_error(const EigenPairs& e, const LinOp& apply_B);
bool is_descending(const EigenPairs& e);

}  // namespace hsq
