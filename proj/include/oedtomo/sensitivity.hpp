#pragma once

// Sensitivities of the MAP reconstruction with respect to design parameters,
// by implicit differentiation of the KKT conditions at the solved point.
// Differentiating F(f, λ_e, s, λ_i; p) = 0 and block-eliminating the slack
// and inequality-multiplier rows gives
//   [[H, -C_eᵀ], [C_e, 0]] [J_f; J_λe] = [-g_k; 0],   H = Q + C_iᵀ S⁻¹Λ C_i
// where g_k = ∂(Q f̂ + b)/∂p_k.  One factorization serves both the
// Jacobian-vector product and its exact adjoint.

#include <functional>
#include <memory>

#include "core.hpp"
#include "qp.hpp"
#include "tomo.hpp"

namespace oedtomo {

// Parameterization hook: how the stationarity residual Q(p) f̂ + b(p) moves
// with the design.  forward maps a design perturbation Δp to the n-vector
// G Δp = Σ_k Δp_k ∂(Qf̂+b)/∂p_k; adjoint maps an n-vector y to Gᵀ y.
struct DesignRhs {
  int num_params = 0;
  std::function<Vector(const Vector&)> forward;
  std::function<Vector(const Vector&)> adjoint;
};

class SensitivityOperator {
 public:
  // Builds the reduced-KKT factorization at the solved point.  Requires the
  // solution to satisfy first-order conditions; slack/multiplier pairs that
  // are both near zero (weakly active constraints) are flagged as degenerate
  // because the implicit function theorem breaks down there.
  SensitivityOperator(const QpProblem& P, const QpSolution& sol, DesignRhs rhs,
                      std::shared_ptr<const detail::KktContext> shared_ctx = nullptr)
      : rhs_(std::move(rhs)), me_(0), mi_(0) {
    LoweredConstraints C(P.constraints, P.n);
    me_ = C.me();
    mi_ = C.mi();
    if (sol.f_hat.size() != P.n)
      throw std::invalid_argument("SensitivityOperator: solution size mismatch");
    if (rhs_.num_params <= 0 || !rhs_.forward || !rhs_.adjoint)
      throw std::invalid_argument("SensitivityOperator: incomplete design parameterization");

    auto res = kkt_residuals(P, sol);
    double scale = 1.0 + P.b().norm();
    double rnorm = std::max({res.norm_dual, res.norm_eq, res.norm_ineq, res.mu});
    if (!(rnorm <= 1e-6 * scale))
      throw std::invalid_argument(
          "SensitivityOperator: point does not satisfy first-order conditions "
          "(residual " + std::to_string(rnorm) + ")");

    Vector w(mi_);
    if (mi_ > 0) {
      const Vector& s = sol.slack;
      const Vector& li = sol.lambda_ineq;
      if (s.minCoeff() <= 0 || li.minCoeff() <= 0)
        throw std::invalid_argument(
            "SensitivityOperator: slack and inequality multipliers must be strictly positive");
      double s_scale = 1.0 + s.maxCoeff();
      double l_scale = 1.0 + li.maxCoeff();
      margin_ = 1.0;
      for (int j = 0; j < mi_; ++j) {
        margin_ = std::min(margin_, std::max(s[j] / s_scale, li[j] / l_scale));
        w[j] = li[j] / s[j];
      }
      degenerate_ = margin_ < 1e-6;
      if (degenerate_)
        degeneracy_note_ = "weak complementarity: min_j max(s_j, lambda_j) ~ " +
                           std::to_string(margin_) + ", min_j s_j*lambda_j ~ " +
                           std::to_string(res.r_comp.size() ? res.r_comp.minCoeff() : 0.0);
    }

    if (shared_ctx) {
      ctx_ = std::move(shared_ctx);
    } else {
      ctx_ = std::make_shared<const detail::KktContext>(P, C);
    }

    // Factor without the interior-point regularization; escalate a diagonal
    // shift only if the exact factorization fails.
    double reg = 0.0;
    for (;;) {
      try {
        factor_ = ctx_->factor(w, reg);
        break;
      } catch (const NumericalError& e) {
        if (reg == 0.0)
          reg = 1e-12;
        else if (reg < 1e-6)
          reg *= 100;
        else
          throw NumericalError(std::string("SensitivityOperator: singular reduced KKT "
                                           "system; ") +
                               (degenerate_ ? degeneracy_note_ : std::string(e.what())));
        regularized_ = true;
      }
    }
  }

  int num_params() const { return rhs_.num_params; }
  bool degenerate() const { return degenerate_; }
  bool regularized() const { return regularized_; }
  double strict_complementarity_margin() const { return margin_; }
  const std::string& degeneracy_note() const { return degeneracy_note_; }

  // J_f̂ · Δp: directional derivative of the reconstruction.
  Vector jvp(const Vector& dp) const {
    if (dp.size() != rhs_.num_params)
      throw std::invalid_argument("SensitivityOperator::jvp: size mismatch");
    Vector g = rhs_.forward(dp);
    Vector jf, jle;
    ctx_->saddle_solve(factor_, -g, Vector::Zero(me_), jf, jle);
    return jf;
  }

  // J_f̂ᵀ · w: adjoint product, exact transpose of jvp (same factorization,
  // symmetric reduced solve).
  Vector vjp(const Vector& wvec) const {
    Vector y, ye;
    ctx_->saddle_solve(factor_, wvec, Vector::Zero(me_), y, ye);
    return -rhs_.adjoint(y);
  }

 private:
  DesignRhs rhs_;
  std::shared_ptr<const detail::KktContext> ctx_;
  detail::KktContext::Factor factor_;
  int me_, mi_;
  bool degenerate_ = false;
  bool regularized_ = false;
  double margin_ = 1.0;
  std::string degeneracy_note_;
};

// Weighted-angle design: M(p) stacks p_k A_k and d(p) stacks p_k d_k, so
//   ∂(Qf̂+b)/∂p_k = 2 p_k A_kᵀ (A_k f̂ - d_k)
// with d_k the unweighted per-angle data block.
inline DesignRhs grad_rhs_problem_a(std::shared_ptr<const AngleBank> bank, Vector p,
                                    std::vector<Vector> data_blocks, const Vector& f_hat) {
  int ell = bank->num_angles();
  if (p.size() != ell || static_cast<int>(data_blocks.size()) != ell)
    throw std::invalid_argument("grad_rhs_problem_a: design/data size mismatch");
  struct State {
    std::shared_ptr<const AngleBank> bank;
    Vector p;
    std::vector<Vector> resid;  // A_k f̂ - d_k per angle
  };
  auto st = std::make_shared<State>();
  st->bank = std::move(bank);
  st->p = std::move(p);
  st->resid.resize(static_cast<size_t>(ell));
  for (int k = 0; k < ell; ++k) {
    if (data_blocks[k].size() != st->bank->n_rays())
      throw std::invalid_argument("grad_rhs_problem_a: data block length != n_rays");
    st->resid[k] = st->bank->block(k).apply(f_hat) - data_blocks[k];
  }
  DesignRhs rhs;
  rhs.num_params = ell;
  rhs.forward = [st, ell](const Vector& dp) {
    if (dp.size() != ell) throw std::invalid_argument("grad_rhs forward: size");
    Vector out = Vector::Zero(st->bank->grid().n());
    for (int k = 0; k < ell; ++k) {
      double c = 2.0 * st->p[k] * dp[k];
      if (c != 0.0) out += c * st->bank->block(k).apply_adjoint(st->resid[k]);
    }
    return out;
  };
  rhs.adjoint = [st, ell](const Vector& y) {
    Vector out(ell);
    for (int k = 0; k < ell; ++k)
      out[k] = 2.0 * st->p[k] * st->resid[k].dot(st->bank->block(k).apply(y));
    return out;
  };
  return rhs;
}

// Free-angle design: both the operator blocks A_k(θ_k) = T R(θ_k) and the
// simulated data d_k(θ_k) = A_k(θ_k) f_true + noise move with the angle, so
//   ∂(Qf̂+b)/∂θ_k = A_k′ᵀ (A_k f̂ - d_k) + A_kᵀ A_k′ (f̂ - f_true)
// with A_k′ = T dR/dθ.  Pass f_true = nullptr to differentiate the solver
// map at fixed data (drops the second term).
inline DesignRhs grad_rhs_problem_b_with_derivs(const ForwardOperatorB& op,
                                                const std::vector<SpMat>& deriv_blocks,
                                                const Vector& f_hat,
                                                const std::vector<Vector>& data_blocks,
                                                const Vector* f_true) {
  int ell = static_cast<int>(op.angles().size());
  if (static_cast<int>(data_blocks.size()) != ell)
    throw std::invalid_argument("grad_rhs_problem_b: data block count mismatch");
  if (static_cast<int>(deriv_blocks.size()) != ell)
    throw std::invalid_argument("grad_rhs_problem_b: derivative block count mismatch");
  struct State {
    std::vector<SpMat> A;        // T R(θ_k)
    std::vector<SpMat> Ad;       // T R'(θ_k)
    std::vector<Vector> resid;   // A_k f̂ - d_k
    std::vector<Vector> dshift;  // A_k' (f̂ - f_true), empty if data fixed
    int n = 0;
  };
  auto st = std::make_shared<State>();
  st->n = static_cast<int>(op.cols());
  for (int k = 0; k < ell; ++k) {
    st->A.push_back(op.block(k).matrix());
    st->Ad.push_back(deriv_blocks[static_cast<size_t>(k)]);
    st->resid.push_back(op.block(k).apply(f_hat) - data_blocks[k]);
    if (f_true) st->dshift.push_back(st->Ad.back() * (f_hat - *f_true));
  }
  bool with_data_term = f_true != nullptr;
  DesignRhs rhs;
  rhs.num_params = ell;
  rhs.forward = [st, ell, with_data_term](const Vector& dth) {
    if (dth.size() != ell) throw std::invalid_argument("grad_rhs forward: size");
    Vector out = Vector::Zero(st->n);
    for (int k = 0; k < ell; ++k) {
      if (dth[k] == 0.0) continue;
      out += dth[k] * (st->Ad[k].transpose() * st->resid[k]);
      if (with_data_term) out += dth[k] * (st->A[k].transpose() * st->dshift[k]);
    }
    return out;
  };
  rhs.adjoint = [st, ell, with_data_term](const Vector& y) {
    Vector out(ell);
    for (int k = 0; k < ell; ++k) {
      out[k] = st->resid[k].dot(st->Ad[k] * y);
      if (with_data_term) out[k] += st->dshift[k].dot(st->A[k] * y);
    }
    return out;
  };
  return rhs;
}

inline DesignRhs grad_rhs_problem_b(const ForwardOperatorB& op, const Vector& f_hat,
                                    const std::vector<Vector>& data_blocks,
                                    const Vector* f_true,
                                    RotationDerivativeMode mode = RotationDerivativeMode::Analytic) {
  int ell = static_cast<int>(op.angles().size());
  SparseOperator T = build_projector(op.grid(), op.n_rays());
  std::vector<SpMat> deriv;
  deriv.reserve(static_cast<size_t>(ell));
  for (int k = 0; k < ell; ++k) {
    SpMat ad =
        T.matrix() * build_rotation_derivative(op.grid(), op.angles()[static_cast<size_t>(k)], mode)
                         .matrix();
    ad.makeCompressed();
    deriv.push_back(std::move(ad));
  }
  return grad_rhs_problem_b_with_derivs(op, deriv, f_hat, data_blocks, f_true);
}

// Convenience: builds the sensitivity operator for a problem/solution pair.
inline SensitivityOperator build_sensitivity(
    const QpProblem& P, const QpSolution& sol, DesignRhs rhs,
    std::shared_ptr<const detail::KktContext> shared_ctx = nullptr) {
  return SensitivityOperator(P, sol, std::move(rhs), std::move(shared_ctx));
}

}  // namespace oedtomo
