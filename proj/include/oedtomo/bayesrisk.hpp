#pragma once

// Closed-form Bayes risk of the regularized (unconstrained) reconstruction:
//   J(p) = (1/2σ²) ||M_α(p)†||_F² = (1/2σ²) Σ_i σ_{α,i}^{-2},
// where M_α stacks the design operator over α L.  Includes the exact
// spectral gradient path, a fast shared-eigenbasis path for commuting
// per-angle Gram families, and the sample-covariance regularization factor.

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "core.hpp"
#include "datagen.hpp"
#include "qp.hpp"

namespace oedtomo {

// Relative cutoff below which a singular value counts as zero.
constexpr double kRankTol = 1e-10;

// Squared-Frobenius pseudoinverse risk via the singular values of the
// stacked matrix [M; αL].  Singular values below kRankTol * σ_max are
// treated as zero and excluded (pseudoinverse semantics).
inline double bayes_risk_frobenius(const Matrix& M, const LMatrix& L, double alpha,
                                   double sigma) {
  if (sigma <= 0) throw std::invalid_argument("bayes_risk: sigma must be > 0");
  if (alpha < 0) throw std::invalid_argument("bayes_risk: alpha must be >= 0");
  int n = static_cast<int>(M.cols());
  int lr = L.rows(n);
  Matrix stacked(M.rows() + lr, n);
  stacked.topRows(M.rows()) = M;
  if (L.kind == LMatrix::Kind::Identity)
    stacked.bottomRows(lr) = alpha * L.scale * Matrix::Identity(n, n);
  else
    stacked.bottomRows(lr) = alpha * L.dense;
  Eigen::BDCSVD<Matrix> svd(stacked);
  const Vector& sv = svd.singularValues();
  double smax = sv.size() ? sv[0] : 0.0;
  double cut = kRankTol * smax;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) sum += 1.0 / (sv[i] * sv[i]);
  return sum / (2.0 * sigma * sigma);
}

// Identity-regularizer shortcut: given the singular values of M alone,
//   J = (1/2σ²) [ Σ_{i<=r} 1/(σ_i² + α²) + (n - r)/α² ],
// r = rank(M) by the relative cutoff.  Returns +inf when α = 0 and M is
// rank-deficient (the null-space directions carry infinite risk).
inline double bayes_risk_spectrum_identityL(const Vector& singular_values, int n,
                                            double alpha, double sigma) {
  if (sigma <= 0) throw std::invalid_argument("bayes_risk: sigma must be > 0");
  if (alpha < 0) throw std::invalid_argument("bayes_risk: alpha must be >= 0");
  double smax = singular_values.size() ? singular_values.maxCoeff() : 0.0;
  double cut = kRankTol * smax;
  double sum = 0.0;
  int r = 0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
    double s = singular_values[i];
    if (s > cut) {
      ++r;
      sum += 1.0 / (s * s + alpha * alpha);
    }
  }
  if (r < n) {
    if (alpha == 0) return std::numeric_limits<double>::infinity();
    sum += static_cast<double>(n - r) / (alpha * alpha);
  }
  return sum / (2.0 * sigma * sigma);
}

// Singular values of a sparse design operator, computed from the smaller of
// the two Gram matrices (MMᵀ when the operator is short and wide).
inline Vector operator_singular_values(const SpMat& M) {
  Eigen::Index m = M.rows(), n = M.cols();
  Matrix gram;
  if (m <= n)
    gram = Matrix(SpMat(M * SpMat(M.transpose())));
  else
    gram = Matrix(SpMat(SpMat(M.transpose()) * M));
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  Vector ev = es.eigenvalues().cwiseMax(0.0);
  return ev.cwiseSqrt().reverse();
}

// Identity-regularizer Bayes risk of a sparse operator on an n-dimensional
// image space.
inline double bayes_risk_identityL(const SpMat& M, double alpha, double sigma) {
  return bayes_risk_spectrum_identityL(operator_singular_values(M),
                                       static_cast<int>(M.cols()), alpha, sigma);
}

// Shared-eigenbasis cache for per-angle Gram matrices G_k = A_kᵀA_k.
// When the family commutes there is a common orthobasis V with
// G_k = V diag(Π_{·,k}) Vᵀ; the design spectrum is then h = Π (p∘p) and risk
// and gradient are closed-form in h.  Commutation is validated by measuring
// the off-diagonal leakage of VᵀG_kV relative to ||G_k||.
struct SpectralCache {
  Matrix V;    // n×n common eigenbasis candidate
  Matrix Pi;   // n×ℓ: column k holds diag(VᵀG_kV)
  bool commuting = false;
  double max_offdiag_rel = 0.0;
  int n = 0, ell = 0;
};

inline SpectralCache build_pi(const std::vector<Matrix>& grams, double tol = 1e-8) {
  if (grams.empty()) throw std::invalid_argument("build_pi: no Gram blocks");
  int n = static_cast<int>(grams[0].rows());
  SpectralCache cache;
  cache.n = n;
  cache.ell = static_cast<int>(grams.size());
  Matrix sum = Matrix::Zero(n, n);
  for (const auto& g : grams) {
    if (g.rows() != n || g.cols() != n)
      throw std::invalid_argument("build_pi: inconsistent Gram dimensions");
    sum += g;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sum);
  cache.V = es.eigenvectors();
  cache.Pi.resize(n, cache.ell);
  cache.max_offdiag_rel = 0.0;
  for (int k = 0; k < cache.ell; ++k) {
    Matrix t = cache.V.transpose() * grams[static_cast<size_t>(k)] * cache.V;
    cache.Pi.col(k) = t.diagonal();
    double gnorm = grams[static_cast<size_t>(k)].norm();
    Matrix off = t;
    off.diagonal().setZero();
    double rel = gnorm > 0 ? off.norm() / gnorm : off.norm();
    cache.max_offdiag_rel = std::max(cache.max_offdiag_rel, rel);
  }
  cache.commuting = cache.max_offdiag_rel <= tol;
  return cache;
}

// Fast risk/gradient through the Π matrix (valid only for a commuting
// family; throws otherwise so the discrepancy cannot pass silently):
//   h = Π (p∘p),  J = (1/2σ²) Σ_a 1/(h_a + α²) + β Σ p,
//   ∇J = -(1/σ²) p ∘ (Πᵀ h_α) + β e,  h_α,a = (h_a + α²)^{-2}.
inline std::pair<double, Vector> risk_and_gradient_a(const SpectralCache& cache,
                                                     const Vector& p, double alpha,
                                                     double sigma, double beta = 0.0,
                                                     bool force = false) {
  if (!cache.commuting && !force)
    throw NumericalError(
        "risk_and_gradient_a: Gram family is not commuting (max off-diagonal leakage " +
        std::to_string(cache.max_offdiag_rel) + "); use exact_risk_and_gradient_a");
  if (p.size() != cache.ell) throw std::invalid_argument("risk_and_gradient_a: size");
  if (sigma <= 0) throw std::invalid_argument("risk_and_gradient_a: sigma must be > 0");
  Vector h = cache.Pi * p.cwiseProduct(p);
  double a2 = alpha * alpha;
  double inv2s = 1.0 / (2.0 * sigma * sigma);
  double J = 0.0;
  Vector halpha(cache.n);
  for (int a = 0; a < cache.n; ++a) {
    double denom = h[a] + a2;
    if (denom <= 0)
      throw NumericalError("risk_and_gradient_a: zero design spectrum with alpha = 0");
    J += 1.0 / denom;
    halpha[a] = 1.0 / (denom * denom);
  }
  J *= inv2s;
  Vector grad = -(1.0 / (sigma * sigma)) * p.cwiseProduct(cache.Pi.transpose() * halpha);
  if (beta != 0.0) {
    J += beta * p.sum();
    grad.array() += beta;
  }
  return {J, grad};
}

// Exact spectral path (any Gram family): W(p) = Σ p_k² G_k + α² LᵀL,
//   J = (1/2σ²) Σ_a 1/λ_a(W) + β Σ p,
//   ∂J/∂p_k = -(p_k/σ²) tr(G_k W⁻²) = -(p_k/σ²) Σ_a ||A_k v_a||² / λ_a².
// Guarded to n <= 4096 (dense eigendecomposition).
inline std::pair<double, Vector> exact_risk_and_gradient_a(
    const std::vector<SpMat>& blocks, const Vector& p, double alpha, double sigma,
    double beta = 0.0, const LMatrix& L = LMatrix::identity()) {
  if (blocks.empty()) throw std::invalid_argument("exact_risk_and_gradient_a: no blocks");
  int ell = static_cast<int>(blocks.size());
  if (p.size() != ell) throw std::invalid_argument("exact_risk_and_gradient_a: size");
  if (sigma <= 0) throw std::invalid_argument("exact_risk_and_gradient_a: sigma must be > 0");
  int n = static_cast<int>(blocks[0].cols());
  if (n > 4096)
    throw std::invalid_argument("exact_risk_and_gradient_a: n > 4096 (dense eigensolve)");
  Matrix W = alpha * alpha * L.gram(n);
  for (int k = 0; k < ell; ++k) {
    double pk2 = p[k] * p[k];
    if (pk2 != 0.0) W += pk2 * Matrix(SpMat(SpMat(blocks[static_cast<size_t>(k)].transpose()) *
                                            blocks[static_cast<size_t>(k)]));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(W);
  const Vector& lam = es.eigenvalues();
  const Matrix& V = es.eigenvectors();
  double inv2s = 1.0 / (2.0 * sigma * sigma);
  double J = 0.0;
  for (int a = 0; a < n; ++a) {
    if (lam[a] <= 0)
      throw NumericalError("exact_risk_and_gradient_a: singular design spectrum");
    J += 1.0 / lam[a];
  }
  J *= inv2s;
  Vector grad(ell);
  for (int k = 0; k < ell; ++k) {
    Matrix AV = blocks[static_cast<size_t>(k)] * V;  // rows × n
    double acc = 0.0;
    for (int a = 0; a < n; ++a) acc += AV.col(a).squaredNorm() / (lam[a] * lam[a]);
    grad[k] = -(p[k] / (sigma * sigma)) * acc;
  }
  if (beta != 0.0) {
    J += beta * p.sum();
    grad.array() += beta;
  }
  return {J, grad};
}

// Inverse square root of the ridged sample covariance:
//   Γ̂ = (1/(N-1)) Σ (f_i - f̄)(f_i - f̄)ᵀ + ridge I,   L = Λ^{-1/2} Vᵀ,
// so that LᵀL = Γ̂⁻¹.  Requires at least two samples and ridge > 0 (the
// covariance is rank-deficient whenever N - 1 < n).
inline LMatrix sample_covariance_factor(const TrainingSet& ts, double ridge) {
  int N = ts.count();
  if (N < 2) throw std::invalid_argument("sample_covariance_factor: need >= 2 samples");
  if (!(ridge > 0)) throw std::invalid_argument("sample_covariance_factor: ridge must be > 0");
  int n = ts.grid.n();
  Vector mean = Vector::Zero(n);
  for (const auto& img : ts.images) mean += img.values;
  mean /= N;
  Matrix cov = Matrix::Zero(n, n);
  for (const auto& img : ts.images) {
    Vector d = img.values - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(d, 1.0 / (N - 1));
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.eigenvalues().minCoeff() <= 0)
    throw NumericalError("sample_covariance_factor: covariance not positive definite");
  Matrix L = es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
             es.eigenvectors().transpose();
  return LMatrix::from_dense(std::move(L));
}

}  // namespace oedtomo
