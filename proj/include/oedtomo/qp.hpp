#pragma once

// Convex quadratic programming for MAP reconstruction:
//   minimize  (1/2) fᵀQf + bᵀf   with  Q = MᵀM + α²LᵀL,  b = -Mᵀd - α²LᵀLμ
//   subject to  C_e f = c_e,  C_i f ≥ c_i.
// Direct solvers handle the unconstrained and equality-only cases; inequality
// constraints go through a primal-dual interior-point method with Mehrotra
// predictor-corrector steps.  Each Newton step is block-eliminated to a
// reduced system in (Δf, Δλ_e), factorized either densely or via a Woodbury
// identity on the data operator when it has fewer rows than columns.

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "core.hpp"

namespace oedtomo {

// Regularization operator L; identity (optionally scaled) or a dense matrix
// such as an inverse sample-covariance factor.
struct LMatrix {
  enum class Kind { Identity, Dense };
  Kind kind = Kind::Identity;
  double scale = 1.0;  // Identity: L = scale * I
  Matrix dense;

  static LMatrix identity(double s = 1.0) {
    LMatrix l;
    l.kind = Kind::Identity;
    l.scale = s;
    return l;
  }
  static LMatrix from_dense(Matrix m) {
    LMatrix l;
    l.kind = Kind::Dense;
    l.dense = std::move(m);
    return l;
  }

  bool diagonal() const { return kind == Kind::Identity; }

  Vector apply(const Vector& x) const {
    return kind == Kind::Identity ? Vector(scale * x) : Vector(dense * x);
  }
  Vector apply_gram(const Vector& x) const {  // LᵀL x
    return kind == Kind::Identity ? Vector(scale * scale * x)
                                  : Vector(dense.transpose() * (dense * x));
  }
  Matrix gram(int n) const {  // LᵀL as dense n×n
    if (kind == Kind::Identity) return scale * scale * Matrix::Identity(n, n);
    return dense.transpose() * dense;
  }
  int rows(int n) const { return kind == Kind::Identity ? n : static_cast<int>(dense.rows()); }
};

enum class ConstraintKind { Unconstrained, EqualitySum, NonNegative, Box, General };

// Constraint specification.  The named kinds cover the experiment regimes
// (sum-equality to the true mass, nonnegativity, box bounds); General takes
// explicit sparse C_e / C_i blocks.
struct ConstraintSpec {
  ConstraintKind kind = ConstraintKind::Unconstrained;
  double eq_total = 0.0;  // EqualitySum: sum(f) = eq_total
  double lo = 0.0, hi = 1.0;  // Box bounds
  SpMat Ce, Ci;
  Vector ce, ci;

  static ConstraintSpec unconstrained() { return {}; }
  static ConstraintSpec equality_sum(double total) {
    ConstraintSpec c;
    c.kind = ConstraintKind::EqualitySum;
    c.eq_total = total;
    return c;
  }
  static ConstraintSpec nonnegative() {
    ConstraintSpec c;
    c.kind = ConstraintKind::NonNegative;
    return c;
  }
  static ConstraintSpec box(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("ConstraintSpec::box: need hi > lo");
    ConstraintSpec c;
    c.kind = ConstraintKind::Box;
    c.lo = lo;
    c.hi = hi;
    return c;
  }
  static ConstraintSpec general(SpMat Ce_, Vector ce_, SpMat Ci_, Vector ci_) {
    if (Ce_.rows() != ce_.size() || Ci_.rows() != ci_.size())
      throw std::invalid_argument("ConstraintSpec::general: row/rhs mismatch");
    ConstraintSpec c;
    c.kind = ConstraintKind::General;
    c.Ce = std::move(Ce_);
    c.ce = std::move(ce_);
    c.Ci = std::move(Ci_);
    c.ci = std::move(ci_);
    return c;
  }
};

// Materialized view of a ConstraintSpec for a fixed dimension n, with fast
// paths for the structurally diagonal inequality kinds.
class LoweredConstraints {
 public:
  LoweredConstraints(const ConstraintSpec& spec, int n) : spec_(spec), n_(n) {
    switch (spec.kind) {
      case ConstraintKind::Unconstrained:
        me_ = 0;
        mi_ = 0;
        break;
      case ConstraintKind::EqualitySum:
        me_ = 1;
        mi_ = 0;
        ce_ = Vector::Constant(1, spec.eq_total);
        break;
      case ConstraintKind::NonNegative:
        me_ = 0;
        mi_ = n;
        ci_ = Vector::Zero(n);
        break;
      case ConstraintKind::Box:
        me_ = 0;
        mi_ = 2 * n;
        ci_.resize(2 * n);
        ci_.head(n).setConstant(spec.lo);
        ci_.tail(n).setConstant(-spec.hi);
        break;
      case ConstraintKind::General:
        if ((spec.Ce.rows() > 0 && spec.Ce.cols() != n) ||
            (spec.Ci.rows() > 0 && spec.Ci.cols() != n))
          throw std::invalid_argument("LoweredConstraints: constraint column mismatch");
        me_ = static_cast<int>(spec.Ce.rows());
        mi_ = static_cast<int>(spec.Ci.rows());
        ce_ = spec.ce;
        ci_ = spec.ci;
        break;
    }
  }

  int n() const { return n_; }
  int me() const { return me_; }
  int mi() const { return mi_; }
  ConstraintKind kind() const { return spec_.kind; }
  const Vector& ce() const { return ce_; }
  const Vector& ci() const { return ci_; }

  // True when C_iᵀ diag(w) C_i is diagonal (identity-block structure).
  bool ci_diagonal() const {
    return spec_.kind == ConstraintKind::NonNegative || spec_.kind == ConstraintKind::Box;
  }

  Vector apply_Ce(const Vector& x) const {
    switch (spec_.kind) {
      case ConstraintKind::EqualitySum:
        return Vector::Constant(1, x.sum());
      case ConstraintKind::General:
        return spec_.Ce * x;
      default:
        return Vector(0);
    }
  }
  Vector apply_CeT(const Vector& y) const {
    switch (spec_.kind) {
      case ConstraintKind::EqualitySum:
        return Vector::Constant(n_, y[0]);
      case ConstraintKind::General:
        return spec_.Ce.transpose() * y;
      default:
        return Vector::Zero(n_);
    }
  }
  Vector apply_Ci(const Vector& x) const {
    switch (spec_.kind) {
      case ConstraintKind::NonNegative:
        return x;
      case ConstraintKind::Box: {
        Vector out(2 * n_);
        out.head(n_) = x;
        out.tail(n_) = -x;
        return out;
      }
      case ConstraintKind::General:
        return spec_.Ci * x;
      default:
        return Vector(0);
    }
  }
  Vector apply_CiT(const Vector& y) const {
    switch (spec_.kind) {
      case ConstraintKind::NonNegative:
        return y;
      case ConstraintKind::Box:
        return y.head(n_) - y.tail(n_);
      case ConstraintKind::General:
        return spec_.Ci.transpose() * y;
      default:
        return Vector::Zero(n_);
    }
  }

  // Diagonal of C_iᵀ diag(w) C_i; valid only when ci_diagonal().
  Vector diag_contribution(const Vector& w) const {
    if (spec_.kind == ConstraintKind::NonNegative) return w;
    if (spec_.kind == ConstraintKind::Box) return w.head(n_) + w.tail(n_);
    throw std::logic_error("diag_contribution: inequality block is not diagonal");
  }

  Matrix dense_Ce() const {
    if (spec_.kind == ConstraintKind::EqualitySum) return Matrix::Ones(1, n_);
    if (spec_.kind == ConstraintKind::General) return Matrix(spec_.Ce);
    return Matrix(0, n_);
  }
  Matrix dense_Ci() const {
    if (spec_.kind == ConstraintKind::NonNegative) return Matrix::Identity(n_, n_);
    if (spec_.kind == ConstraintKind::Box) {
      Matrix c(2 * n_, n_);
      c.topRows(n_) = Matrix::Identity(n_, n_);
      c.bottomRows(n_) = -Matrix::Identity(n_, n_);
      return c;
    }
    if (spec_.kind == ConstraintKind::General) return Matrix(spec_.Ci);
    return Matrix(0, n_);
  }

 private:
  ConstraintSpec spec_;
  int n_;
  int me_ = 0, mi_ = 0;
  Vector ce_{Vector(0)}, ci_{Vector(0)};
};

// QP instance.  Constructed either from a data operator (M, d, α, L, prior)
// or from an explicit dense (Q, b) pair; the structured form enables the
// low-rank factorization paths.
struct QpProblem {
  int n = 0;
  SpMat M;  // m×n data operator (0 rows when explicit)
  Vector d;
  double alpha = 0.0;
  LMatrix L;
  Vector prior_mean;  // empty means zero
  ConstraintSpec constraints;
  std::optional<Matrix> Q_explicit;
  Vector b_vec;

  static QpProblem from_operator(SpMat M_, Vector d_, double alpha_, ConstraintSpec cs,
                                 LMatrix L_ = LMatrix::identity(), Vector prior = Vector(0)) {
    if (M_.rows() != d_.size())
      throw std::invalid_argument("QpProblem: data length != operator rows");
    if (alpha_ < 0) throw std::invalid_argument("QpProblem: alpha must be >= 0");
    QpProblem p;
    p.n = static_cast<int>(M_.cols());
    p.M = std::move(M_);
    p.d = std::move(d_);
    p.alpha = alpha_;
    p.L = std::move(L_);
    p.prior_mean = std::move(prior);
    p.constraints = std::move(cs);
    p.b_vec = -(p.M.transpose() * p.d);
    if (p.prior_mean.size() > 0) {
      if (p.prior_mean.size() != p.n)
        throw std::invalid_argument("QpProblem: prior mean size mismatch");
      p.b_vec -= p.alpha * p.alpha * p.L.apply_gram(p.prior_mean);
    }
    return p;
  }

  static QpProblem from_dense(Matrix Q, Vector b, ConstraintSpec cs) {
    if (Q.rows() != Q.cols() || Q.rows() != b.size())
      throw std::invalid_argument("QpProblem: dense Q/b dimension mismatch");
    QpProblem p;
    p.n = static_cast<int>(Q.rows());
    p.M.resize(0, p.n);
    p.d.resize(0);
    p.Q_explicit = std::move(Q);
    p.b_vec = std::move(b);
    p.constraints = std::move(cs);
    return p;
  }

  const Vector& b() const { return b_vec; }

  Vector apply_Q(const Vector& x) const {
    if (Q_explicit) return *Q_explicit * x;
    Vector out = M.transpose() * (M * x);
    if (alpha > 0) out += alpha * alpha * L.apply_gram(x);
    return out;
  }

  // True when Q = MᵀM + diag (identity-scaled L), enabling the Woodbury path.
  bool structured_diag() const { return !Q_explicit && L.diagonal(); }

  // Diagonal regularization part α² s² e (structured case only).
  Vector diag_reg() const {
    return Vector::Constant(n, alpha * alpha * L.scale * L.scale);
  }

  Matrix dense_Q() const {
    if (Q_explicit) return *Q_explicit;
    Matrix q = Matrix(SpMat(M.transpose() * M));
    if (alpha > 0) q += alpha * alpha * L.gram(n);
    return q;
  }

  double objective(const Vector& f) const {
    return 0.5 * f.dot(apply_Q(f)) + b_vec.dot(f);
  }
};

struct QpSolution {
  Vector f_hat;
  Vector lambda_eq;
  Vector slack;
  Vector lambda_ineq;
  int iterations = 0;
  double comp_measure = 0.0;  // final duality measure μ = sᵀλ_i / m_i
  double res_dual = 0.0, res_eq = 0.0, res_ineq = 0.0;
  std::vector<double> mu_trace;  // duality measure per interior-point iteration
};

struct KktResiduals {
  Vector r_dual, r_eq, r_ineq, r_comp;
  double mu = 0.0;
  double norm_dual = 0.0, norm_eq = 0.0, norm_ineq = 0.0, norm_comp = 0.0;
};

// Exact KKT residual blocks at a candidate primal-dual point.  Requires
// nonnegative slack and inequality multipliers; a slack vector with no
// positive entry (while inequalities exist) is rejected as non-interior.
inline KktResiduals kkt_residuals(const QpProblem& P, const QpSolution& point) {
  LoweredConstraints C(P.constraints, P.n);
  if (point.f_hat.size() != P.n)
    throw std::invalid_argument("kkt_residuals: primal size mismatch");
  if (point.lambda_eq.size() != C.me() || point.slack.size() != C.mi() ||
      point.lambda_ineq.size() != C.mi())
    throw std::invalid_argument("kkt_residuals: dual/slack size mismatch");
  if (C.mi() > 0) {
    if (point.slack.minCoeff() < 0 || point.lambda_ineq.minCoeff() < 0)
      throw std::invalid_argument("kkt_residuals: slack and lambda_ineq must be >= 0");
    if (point.slack.maxCoeff() <= 0)
      throw std::invalid_argument("kkt_residuals: slack must have positive entries (s > 0)");
  }
  KktResiduals r;
  r.r_dual = P.apply_Q(point.f_hat) + P.b();
  if (C.me() > 0) r.r_dual -= C.apply_CeT(point.lambda_eq);
  if (C.mi() > 0) r.r_dual -= C.apply_CiT(point.lambda_ineq);
  r.r_eq = C.me() > 0 ? Vector(C.apply_Ce(point.f_hat) - C.ce()) : Vector(0);
  r.r_ineq = C.mi() > 0 ? Vector(C.apply_Ci(point.f_hat) - C.ci() - point.slack) : Vector(0);
  r.r_comp = C.mi() > 0 ? Vector(point.slack.cwiseProduct(point.lambda_ineq)) : Vector(0);
  r.mu = C.mi() > 0 ? r.r_comp.sum() / C.mi() : 0.0;
  r.norm_dual = r.r_dual.norm();
  r.norm_eq = r.r_eq.size() ? r.r_eq.norm() : 0.0;
  r.norm_ineq = r.r_ineq.size() ? r.r_ineq.norm() : 0.0;
  r.norm_comp = r.r_comp.size() ? r.r_comp.norm() : 0.0;
  return r;
}

namespace detail {

// Reduced-KKT factorization context.  Per iterate, the Newton system is
// condensed to H = Q + C_iᵀ S⁻¹Λ C_i with an equality saddle handled by a
// small Schur complement.  H solves run either densely (LLT of H) or through
// the Woodbury identity (D + MᵀM)⁻¹ = D⁻¹ - D⁻¹Mᵀ(I + MD⁻¹Mᵀ)⁻¹MD⁻¹ when the
// data operator is short and wide and everything else is diagonal.
class KktContext {
 public:
  enum class Mode { Dense, Woodbury };

  // Owns copies of the structural pieces (data operator / dense Q, equality
  // rows), so one context can be shared across problems that differ only in
  // their right-hand sides (e.g. per-sample data at a fixed design).
  KktContext(const QpProblem& P, const LoweredConstraints& C) : C_(P.constraints, P.n) {
    bool diag_ok = (C.mi() == 0 || C.ci_diagonal());
    Eigen::Index m = P.M.rows();
    if (P.structured_diag() && diag_ok && m > 0 &&
        m <= static_cast<Eigen::Index>(0.9 * P.n)) {
      mode_ = Mode::Woodbury;
      d0_ = P.diag_reg();
      M_ = P.M;
    } else {
      mode_ = Mode::Dense;
      Qd_ = P.dense_Q();
    }
    if (C.me() > 0) Ced_ = C.dense_Ce();
  }

  Mode mode() const { return mode_; }

  struct Factor {
    Mode mode;
    Vector Dv;                 // Woodbury: diagonal D
    Eigen::LLT<Matrix> llt;    // dense H, or Woodbury capacitance K
    Matrix E;                  // H⁻¹ C_eᵀ
    Eigen::LLT<Matrix> se_llt; // C_e H⁻¹ C_eᵀ
    bool has_eq = false;
  };

  // w: inequality weights λ_i / s_i (size m_i); reg: static diagonal shift.
  Factor factor(const Vector& w, double reg) const {
    Factor F;
    F.mode = mode_;
    Vector wdiag;
    if (C_.mi() > 0 && C_.ci_diagonal()) wdiag = C_.diag_contribution(w);
    if (mode_ == Mode::Woodbury) {
      F.Dv = d0_;
      if (wdiag.size()) F.Dv += wdiag;
      F.Dv.array() += reg;
      if (F.Dv.minCoeff() <= 0)
        throw NumericalError("reduced system: nonpositive diagonal");
      const SpMat& M = M_;
      Eigen::Index m = M.rows();
      Matrix K = Matrix::Zero(m, m);
      for (int j = 0; j < M.outerSize(); ++j) {
        double invd = 1.0 / F.Dv[j];
        for (SpMat::InnerIterator it1(M, j); it1; ++it1) {
          double w1 = it1.value() * invd;
          for (SpMat::InnerIterator it2(M, j); it2 && it2.row() <= it1.row(); ++it2)
            K(it1.row(), it2.row()) += w1 * it2.value();
        }
      }
      K.diagonal().array() += 1.0;
      F.llt.compute(K);
      if (F.llt.info() != Eigen::Success)
        throw NumericalError("reduced system: capacitance factorization failed");
    } else {
      Matrix H = Qd_;
      if (C_.mi() > 0) {
        if (C_.ci_diagonal()) {
          H.diagonal() += wdiag;
        } else {
          Matrix Ci = C_.dense_Ci();
          H.noalias() += Ci.transpose() * w.asDiagonal() * Ci;
        }
      }
      H.diagonal().array() += reg;
      F.llt.compute(H);
      if (F.llt.info() != Eigen::Success)
        throw NumericalError("reduced system: Hessian factorization failed (Q singular?)");
    }
    if (C_.me() > 0) {
      F.has_eq = true;
      F.E.resize(C_.n(), C_.me());
      for (int k = 0; k < C_.me(); ++k)
        F.E.col(k) = h_solve(F, Ced_.row(k).transpose());
      Matrix Se = Ced_ * F.E;
      F.se_llt.compute(Se);
      if (F.se_llt.info() != Eigen::Success)
        throw NumericalError("equality Schur complement not positive definite "
                             "(rank-deficient equality constraints)");
    }
    return F;
  }

  Vector h_solve(const Factor& F, const Vector& rhs) const {
    if (F.mode == Mode::Dense) return F.llt.solve(rhs);
    Vector x = rhs.cwiseQuotient(F.Dv);
    Vector t = M_ * x;
    Vector u = F.llt.solve(t);
    x -= (M_.transpose() * u).cwiseQuotient(F.Dv);
    return x;
  }

  // Solves H Δf - C_eᵀ Δλe = rhs_f,  C_e Δf = rhs_e.
  void saddle_solve(const Factor& F, const Vector& rhs_f, const Vector& rhs_e, Vector& df,
                    Vector& dle) const {
    df = h_solve(F, rhs_f);
    if (!F.has_eq) {
      dle.resize(0);
      return;
    }
    Vector gap = rhs_e - Ced_ * df;
    dle = F.se_llt.solve(gap);
    df += F.E * dle;
  }

  const Matrix& dense_Ce() const { return Ced_; }

 private:
  LoweredConstraints C_;
  Mode mode_;
  SpMat M_;
  Matrix Qd_;
  Vector d0_;
  Matrix Ced_;
};

inline double max_step(const Vector& x, const Vector& dx, double frac) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (dx[i] < 0) a = std::min(a, -frac * x[i] / dx[i]);
  return a;
}

}  // namespace detail

struct IpOptions {
  double tol = 1e-8;
  int max_iter = 100;
  double tau = 0.995;   // fraction-to-boundary
  double reg = 1e-10;   // static diagonal regularization of the reduced system
};

// Direct solve, no constraints: f = -Q⁻¹ b with one refinement pass, checked
// to ||Qf + b|| <= 1e-10 * max(1, ||b||).
inline QpSolution solve_unconstrained(const QpProblem& P,
                                      const detail::KktContext* shared_ctx = nullptr) {
  LoweredConstraints C(P.constraints, P.n);
  if (C.me() > 0 || C.mi() > 0)
    throw std::invalid_argument("solve_unconstrained: problem has constraints");
  QpSolution sol;
  Vector rhs = -P.b();
  std::optional<detail::KktContext> own;
  if (!shared_ctx) own.emplace(P, C);
  const detail::KktContext& ctx = shared_ctx ? *shared_ctx : *own;
  auto F = ctx.factor(Vector(0), 0.0);
  sol.f_hat = ctx.h_solve(F, rhs);
  Vector r = P.apply_Q(sol.f_hat) + P.b();
  sol.f_hat -= ctx.h_solve(F, r);
  r = P.apply_Q(sol.f_hat) + P.b();
  sol.res_dual = r.norm();
  double bound = 1e-10 * std::max(1.0, P.b().norm());
  if (!(sol.res_dual <= bound) || !sol.f_hat.allFinite())
    throw NumericalError("solve_unconstrained: residual " + std::to_string(sol.res_dual) +
                         " exceeds bound (Q singular or ill-conditioned)");
  sol.iterations = 1;
  return sol;
}

// Direct solve with equality constraints only, via the saddle system
// [[Q, -C_eᵀ], [C_e, 0]].  Uses the reduced Schur path when Q is positive
// definite and falls back to a dense LU of the full saddle otherwise.
inline QpSolution solve_equality(const QpProblem& P,
                                 const detail::KktContext* shared_ctx = nullptr) {
  LoweredConstraints C(P.constraints, P.n);
  if (C.me() == 0 || C.mi() > 0)
    throw std::invalid_argument("solve_equality: needs equality-only constraints");
  QpSolution sol;
  bool done = false;
  try {
    std::optional<detail::KktContext> own;
    if (!shared_ctx) own.emplace(P, C);
    const detail::KktContext& ctx = shared_ctx ? *shared_ctx : *own;
    auto F = ctx.factor(Vector(0), 0.0);
    ctx.saddle_solve(F, -P.b(), C.ce(), sol.f_hat, sol.lambda_eq);
    done = true;
  } catch (const NumericalError&) {
    done = false;  // Q indefinite/singular: use the full saddle below
  }
  if (!done) {
    int n = P.n, me = C.me();
    Matrix K(n + me, n + me);
    K.topLeftCorner(n, n) = P.dense_Q();
    Matrix Ce = C.dense_Ce();
    K.topRightCorner(n, me) = -Ce.transpose();
    K.bottomLeftCorner(me, n) = Ce;
    K.bottomRightCorner(me, me).setZero();
    Vector rhs(n + me);
    rhs.head(n) = -P.b();
    rhs.tail(me) = C.ce();
    Eigen::PartialPivLU<Matrix> lu(K);
    Vector z = lu.solve(rhs);
    z += lu.solve(rhs - K * z);
    sol.f_hat = z.head(n);
    sol.lambda_eq = z.tail(me);
  }
  Vector rd = P.apply_Q(sol.f_hat) + P.b() - C.apply_CeT(sol.lambda_eq);
  Vector re = C.apply_Ce(sol.f_hat) - C.ce();
  sol.res_dual = rd.norm();
  sol.res_eq = re.norm();
  double scale = 1.0 + P.b().norm() + C.ce().norm();
  if (!(sol.res_dual <= 1e-9 * scale) || !(sol.res_eq <= 1e-9 * scale) ||
      !sol.f_hat.allFinite())
    throw NumericalError("solve_equality: saddle system solved poorly (residuals " +
                         std::to_string(sol.res_dual) + ", " + std::to_string(sol.res_eq) +
                         "); equality constraints may be rank-deficient or inconsistent");
  sol.iterations = 1;
  return sol;
}

// Primal-dual interior-point solver with Mehrotra predictor-corrector.
// Two reduced-system solves per iteration share one factorization; a single
// fraction-to-boundary step (τ = 0.995) is applied to all variables.  An
// optional warm start seeds the iterates from a previous solution.
inline QpSolution solve_interior_point(const QpProblem& P, const IpOptions& opts = {},
                                       const QpSolution* warm = nullptr,
                                       const detail::KktContext* shared_ctx = nullptr) {
  LoweredConstraints C(P.constraints, P.n);
  const int n = P.n, me = C.me(), mi = C.mi();
  if (mi == 0)
    throw std::invalid_argument(
        "solve_interior_point: no inequality constraints (use the direct solvers)");

  std::optional<detail::KktContext> own_ctx;
  if (!shared_ctx) own_ctx.emplace(P, C);
  const detail::KktContext& ctx = shared_ctx ? *shared_ctx : *own_ctx;

  // Starting point: prior mean pushed strictly inside the named constraint
  // sets; slack floored at 1; unit inequality multipliers.
  Vector f = P.prior_mean.size() ? P.prior_mean : Vector::Zero(n);
  if (P.constraints.kind == ConstraintKind::NonNegative)
    f = f.cwiseMax(0.1);
  else if (P.constraints.kind == ConstraintKind::Box) {
    double margin = 0.1 * (P.constraints.hi - P.constraints.lo);
    f = f.cwiseMax(P.constraints.lo + margin).cwiseMin(P.constraints.hi - margin);
  }
  Vector le = Vector::Zero(me);
  Vector s = (C.apply_Ci(f) - C.ci()).cwiseMax(1.0);
  Vector li = Vector::Ones(mi);
  if (warm && warm->f_hat.size() == n && warm->slack.size() == mi &&
      warm->lambda_ineq.size() == mi) {
    f = warm->f_hat;
    s = warm->slack.cwiseMax(1e-6);
    li = warm->lambda_ineq.cwiseMax(1e-6);
    if (warm->lambda_eq.size() == me) le = warm->lambda_eq;
  }

  const double bscale = 1.0 + P.b().norm();
  double init_res = -1.0;
  std::vector<double> mu_trace;

  // Anti-stall safeguard.  Pure predictor-corrector steps can limit-cycle on
  // unlucky geometry (the heuristic centering weight δ = (μ_aff/μ)³ stays
  // small while the full step keeps overshooting).  When μ stops making
  // headway we permanently switch to conservative path-following: centering
  // weight at least 1/2 and a shorter fraction-to-boundary step, which
  // restores a guaranteed per-iteration contraction.
  double best_mu = std::numeric_limits<double>::infinity();
  int stall = 0;
  bool safeguard = false;

  // Best iterate seen so far.  When the overall residual hits its floating-
  // point floor just above the requested tolerance (active slacks can reach
  // machine precision while the dual residual is still limited by the
  // conditioning of the reduced system), iterating further only degrades the
  // factorization.  After several iterations without progress we return the
  // best iterate, provided complementarity is fully resolved and the
  // remaining residual is within a small factor of the target.
  QpSolution best;
  double best_res = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int it = 0; it < opts.max_iter; ++it) {
    Vector rd = P.apply_Q(f) + P.b() - C.apply_CiT(li);
    if (me > 0) rd -= C.apply_CeT(le);
    Vector re = me > 0 ? Vector(C.apply_Ce(f) - C.ce()) : Vector(0);
    Vector ri = C.apply_Ci(f) - C.ci() - s;
    double mu = s.dot(li) / mi;
    mu_trace.push_back(mu);

    double res = std::max({rd.norm(), me > 0 ? re.norm() : 0.0, ri.norm(), mu});
    if (!std::isfinite(res))
      throw NumericalError("interior point: non-finite residual at iteration " +
                           std::to_string(it));
    if (init_res < 0) init_res = res;
    if (res <= opts.tol * bscale) {
      QpSolution sol;
      sol.f_hat = f;
      sol.lambda_eq = le;
      sol.slack = s;
      sol.lambda_ineq = li;
      sol.iterations = it;
      sol.comp_measure = mu;
      sol.res_dual = rd.norm();
      sol.res_eq = me > 0 ? re.norm() : 0.0;
      sol.res_ineq = ri.norm();
      sol.mu_trace = std::move(mu_trace);
      return sol;
    }
    if (res > 1e8 * (init_res + 1.0))
      throw NumericalError("interior point: diverging residuals (iteration " +
                           std::to_string(it) + ", residual " + std::to_string(res) + ")");

    if (res < 0.99 * best_res) {
      best_res = res;
      best.f_hat = f;
      best.lambda_eq = le;
      best.slack = s;
      best.lambda_ineq = li;
      best.iterations = it;
      best.comp_measure = mu;
      best.res_dual = rd.norm();
      best.res_eq = me > 0 ? re.norm() : 0.0;
      best.res_ineq = ri.norm();
      since_best = 0;
    } else if (++since_best >= 6) {
      if (best.comp_measure <= opts.tol * bscale && best_res <= 1e3 * opts.tol * bscale) {
        best.mu_trace = std::move(mu_trace);
        return best;
      }
      std::ostringstream msg;
      msg << "interior point: stagnated at residual " << best_res << " (target "
          << opts.tol * bscale << ") after " << it << " iterations";
      throw NumericalError(msg.str());
    }

    if (mu < 0.95 * best_mu) {
      best_mu = mu;
      stall = 0;
    } else if (res > 10.0 * opts.tol * bscale && ++stall >= 3) {
      safeguard = true;
    }

    Vector w = li.cwiseQuotient(s);

    // Near a degenerate optimum the weights λ_i/s_i can grow so large that
    // rounding makes the reduced Hessian indefinite.  Retry the
    // factorization on a fixed ladder of stronger diagonal shifts before
    // giving up; the ladder is deterministic, so solves stay reproducible.
    double reg_try = opts.reg;
    std::optional<detail::KktContext::Factor> fac;
    for (;;) {
      try {
        fac.emplace(ctx.factor(w, reg_try));
        break;
      } catch (const NumericalError&) {
        if (reg_try >= 1.0) throw;
        reg_try = std::max(reg_try * 100.0, 1e-8);
      }
    }
    const auto& F = *fac;

    auto reduced_solve = [&](const Vector& rc, Vector& df, Vector& dle_out, Vector& ds,
                             Vector& dli) {
      Vector rhs_f = -rd - C.apply_CiT((rc + li.cwiseProduct(ri)).cwiseQuotient(s));
      Vector rhs_e = me > 0 ? Vector(-re) : Vector(0);
      ctx.saddle_solve(F, rhs_f, rhs_e, df, dle_out);
      ds = C.apply_Ci(df) + ri;
      dli = -(rc + li.cwiseProduct(ds)).cwiseQuotient(s);
    };

    // Predictor: pure Newton step on the unperturbed KKT system.
    Vector df_a, dle_a, ds_a, dli_a;
    reduced_solve(s.cwiseProduct(li), df_a, dle_a, ds_a, dli_a);
    double a_aff = std::min(detail::max_step(s, ds_a, 1.0), detail::max_step(li, dli_a, 1.0));
    double mu_aff = (s + a_aff * ds_a).dot(li + a_aff * dli_a) / mi;
    double delta = std::pow(mu_aff / mu, 3.0);
    double tau = opts.tau;
    if (safeguard) {
      delta = std::max(delta, 0.5);
      tau = std::min(tau, 0.9);
    }
    // Keep the centering target from undershooting the duality measure far
    // below the stopping tolerance.  Driving μ toward machine precision while
    // other residuals still need work makes the weights λ_i/s_i — and with
    // them the conditioning of the reduced system — explode for no benefit.
    const double mu_floor = 0.01 * opts.tol * bscale;
    if (mu_aff < mu_floor) delta = std::max(delta, mu_floor / mu);

    // Corrector: recenter toward δμ and cancel the second-order term.
    Vector rc = s.cwiseProduct(li) + ds_a.cwiseProduct(dli_a) -
                Vector::Constant(mi, delta * mu);
    Vector df, dle, ds, dli;
    reduced_solve(rc, df, dle, ds, dli);

    double a = std::min({1.0, detail::max_step(s, ds, tau),
                         detail::max_step(li, dli, tau)});
    if (a < 1e-12)
      throw NumericalError("interior point: step length collapsed at iteration " +
                           std::to_string(it));
    f += a * df;
    s += a * ds;
    li += a * dli;
    if (me > 0) le += a * dle;
  }

  std::ostringstream msg;
  msg << "interior point: no convergence in " << opts.max_iter
      << " iterations; duality measure trace:";
  size_t first = mu_trace.size() > 8 ? mu_trace.size() - 8 : 0;
  for (size_t i = first; i < mu_trace.size(); ++i) msg << " " << mu_trace[i];
  throw NumericalError(msg.str());
}

// Dispatches on the constraint kind: direct solvers when possible, interior
// point otherwise.
inline QpSolution solve_qp(const QpProblem& P, const IpOptions& opts = {},
                           const QpSolution* warm = nullptr,
                           const detail::KktContext* shared_ctx = nullptr) {
  LoweredConstraints C(P.constraints, P.n);
  if (C.mi() > 0) return solve_interior_point(P, opts, warm, shared_ctx);
  if (C.me() > 0) return solve_equality(P, shared_ctx);
  return solve_unconstrained(P, shared_ctx);
}

}  // namespace oedtomo
