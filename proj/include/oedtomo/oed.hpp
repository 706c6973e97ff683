#pragma once

// Outer-loop optimal experimental design over the training-set objective
//   J_N(design) = (1/2N) Σ_i ||f̂_i(design) - f_i||² + R(design).
// Problem A optimizes nonnegative per-angle weights on a fixed grid (with an
// l1 term and a two-phase sparsify-then-refit schedule); Problem B places ℓ
// free angles, reparameterized by increments to keep them ordered.  Both use
// projected gradient descent with gradients from the KKT sensitivity
// operator.  Scans and sweeps reproduce the experiment tables.
//
// Reported reconstruction error is the mean per-pixel squared error
//   MSE = (1/N) Σ_i ||f̂_i - f_i||² / n.
//
// Data protocols (fixed noise per sample, reproducible across evaluations):
//  - Problem A: full-grid data d_i = M_full f_i + σ_i z_i are simulated once;
//    a design p selects and scales rows, d_i(p) = P(p) d_i.
//  - Problem B: the noise vector z_i and the scale σ_i (from the unrotated
//    reference projection) are frozen per sample; at angles θ the data are
//    d_i(θ) = M(θ) f_i + σ_i z_i, a smooth function of θ.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "datagen.hpp"
#include "parallel.hpp"
#include "pgd.hpp"
#include "qp.hpp"
#include "rng.hpp"
#include "sensitivity.hpp"
#include "bayesrisk.hpp"
#include "tomo.hpp"

namespace oedtomo {

struct OedConfig {
  double alpha = 1e-2;           // inner Tikhonov weight
  double beta = 0.0;             // l1 design penalty (Problem A phase 1)
  ConstraintKind constraint = ConstraintKind::Unconstrained;
  double box_lo = 0.0, box_hi = 1.0;
  bool equality_true_mass = true;  // EqualitySum target = sum(f_true) per sample
  double eq_total = 0.0;           // used when equality_true_mass is false
  ConstraintSpec general_constraint;  // used when constraint == General
  double noise_level = 1e-3;     // relative noise level for simulated data
  std::uint64_t noise_seed = 424242;
  int n_rays = 0;                // 0 -> grid width
  int workers = 1;
  IpOptions ip;
  PgOptions outer;
  double support_threshold = 1e-3;   // phase-1 support cut, relative to max weight
  double assemble_threshold = 1e-8;  // operator row-drop cut, relative to max weight
  Vector prior_mean;             // empty = zero
};

struct OedResult {
  Vector p_opt;                       // A: full-length weights; B: angles in degrees
  std::vector<int> support;           // A: surviving angle indices after phase 1
  std::vector<double> support_angles; // A: angles of the support; B: final angles
  double objective = 0.0;
  double mse = 0.0;
  std::vector<double> trace1, trace2; // outer objective traces (phase 1 / phase 2)
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline ConstraintSpec constraint_for(const OedConfig& cfg, const Image& f_true) {
  switch (cfg.constraint) {
    case ConstraintKind::Unconstrained:
      return ConstraintSpec::unconstrained();
    case ConstraintKind::EqualitySum:
      return ConstraintSpec::equality_sum(cfg.equality_true_mass ? f_true.values.sum()
                                                                 : cfg.eq_total);
    case ConstraintKind::NonNegative:
      return ConstraintSpec::nonnegative();
    case ConstraintKind::Box:
      return ConstraintSpec::box(cfg.box_lo, cfg.box_hi);
    case ConstraintKind::General:
      return cfg.general_constraint;
  }
  throw std::logic_error("constraint_for: bad kind");
}

inline int rays_for(const OedConfig& cfg, const Grid& grid) {
  return cfg.n_rays > 0 ? cfg.n_rays : grid.width;
}

// Converts inner-solver failures at line-search trial points into +inf so
// the search backs off instead of aborting the whole design run.  A failure
// on the very first evaluation is a real error and is rethrown.
template <class F>
std::function<PgEval(const Vector&, bool)> guarded_objective(F eval) {
  auto first = std::make_shared<bool>(true);
  return [eval, first](const Vector& x, bool want_gradient) mutable -> PgEval {
    try {
      PgEval e = eval(x, want_gradient);
      *first = false;
      return e;
    } catch (const NumericalError&) {
      if (*first) throw;
      PgEval e;
      e.objective = std::numeric_limits<double>::infinity();
      if (want_gradient) e.gradient = Vector::Zero(x.size());
      return e;
    }
  };
}

}  // namespace detail

// Weighted-angle empirical objective.  Holds the per-sample full-grid noisy
// data; every evaluation rebuilds M(p) once and shares its factorization
// context across samples.  Evaluations are stateless (every inner solve is a
// cold start), so the objective is a pure function of p — reproducible
// bitwise across calls and worker counts.
class EmpiricalObjectiveA {
 public:
  EmpiricalObjectiveA(const TrainingSet& ts, std::vector<double> angles, OedConfig cfg)
      : ts_(&ts), cfg_(std::move(cfg)),
        bank_(std::make_shared<AngleBank>(ts.grid, detail::rays_for(cfg_, ts.grid),
                                          std::move(angles))) {
    int N = ts.count();
    int ell = bank_->num_angles();
    int nr = bank_->n_rays();
    d_blocks_.resize(static_cast<size_t>(N));
    Rng root(cfg_.noise_seed);
    for (int i = 0; i < N; ++i) {
      Vector clean(static_cast<Eigen::Index>(ell) * nr);
      for (int k = 0; k < ell; ++k)
        clean.segment(static_cast<Eigen::Index>(k) * nr, nr) =
            bank_->block(k).apply(ts.images[static_cast<size_t>(i)].values);
      Vector noisy = noisy_from_clean_rng(clean, cfg_.noise_level,
                                          root.fork(static_cast<std::uint64_t>(i)));
      auto& blocks = d_blocks_[static_cast<size_t>(i)];
      blocks.resize(static_cast<size_t>(ell));
      for (int k = 0; k < ell; ++k)
        blocks[static_cast<size_t>(k)] = noisy.segment(static_cast<Eigen::Index>(k) * nr, nr);
    }
  }

  int num_params() const { return bank_->num_angles(); }
  const AngleBank& bank() const { return *bank_; }
  const OedConfig& config() const { return cfg_; }
  double last_mse() const { return last_mse_; }
  const std::vector<Vector>& data_blocks(int i) const {
    return d_blocks_[static_cast<size_t>(i)];
  }

  // Solves sample i at design p and returns the reconstruction.
  Vector reconstruct(const Vector& p, int i) const {
    ForwardOperatorA op(bank_, p, cfg_.assemble_threshold);
    SpMat M = op.to_sparse();
    QpProblem P = QpProblem::from_operator(M, weighted_data(i, op), cfg_.alpha,
                                           detail::constraint_for(cfg_, ts_->images[static_cast<size_t>(i)]),
                                           LMatrix::identity(), cfg_.prior_mean);
    return solve_qp(P, cfg_.ip).f_hat;
  }

  PgEval evaluate(const Vector& p, bool want_gradient) {
    const int N = ts_->count();
    const int ell = num_params();
    const int n = ts_->grid.n();
    if (p.size() != ell) throw std::invalid_argument("EmpiricalObjectiveA: design size");

    ForwardOperatorA op(bank_, p, cfg_.assemble_threshold);
    SpMat M = op.to_sparse();

    // Shared structural context (built from a representative problem).
    QpProblem P0 = QpProblem::from_operator(
        M, weighted_data(0, op), cfg_.alpha,
        detail::constraint_for(cfg_, ts_->images[0]), LMatrix::identity(), cfg_.prior_mean);
    LoweredConstraints C0(P0.constraints, n);
    auto ctx = std::make_shared<const oedtomo::detail::KktContext>(P0, C0);

    std::vector<double> obj(static_cast<size_t>(N)), mse(static_cast<size_t>(N));
    std::vector<Vector> grads(static_cast<size_t>(N));
    parallel_for(N, cfg_.workers, [&](int i) {
      const Image& f_true = ts_->images[static_cast<size_t>(i)];
      QpProblem P = QpProblem::from_operator(M, weighted_data(i, op), cfg_.alpha,
                                             detail::constraint_for(cfg_, f_true),
                                             LMatrix::identity(), cfg_.prior_mean);
      QpSolution sol = solve_qp(P, cfg_.ip, nullptr, ctx.get());
      Vector diff = sol.f_hat - f_true.values;
      obj[static_cast<size_t>(i)] = 0.5 * diff.squaredNorm();
      mse[static_cast<size_t>(i)] = diff.squaredNorm() / n;
      if (want_gradient) {
        DesignRhs rhs = grad_rhs_problem_a(bank_, p, d_blocks_[static_cast<size_t>(i)],
                                           sol.f_hat);
        SensitivityOperator sens(P, sol, std::move(rhs), ctx);
        grads[static_cast<size_t>(i)] = sens.vjp(diff);
      }
    });

    PgEval out;
    double J = 0.0, m = 0.0;
    for (int i = 0; i < N; ++i) {
      J += obj[static_cast<size_t>(i)];
      m += mse[static_cast<size_t>(i)];
    }
    out.objective = J / N;
    last_mse_ = m / N;
    if (want_gradient) {
      Vector g = Vector::Zero(ell);
      for (int i = 0; i < N; ++i) g += grads[static_cast<size_t>(i)];
      g /= N;
      if (cfg_.beta != 0.0) g.array() += cfg_.beta;
      out.gradient = std::move(g);
    }
    if (cfg_.beta != 0.0) out.objective += cfg_.beta * p.sum();
    return out;
  }

 private:
  static Vector noisy_from_clean_rng(const Vector& clean, double level, Rng rng) {
    if (level == 0) return clean;
    double scale = level * clean.norm() / std::sqrt(static_cast<double>(clean.size()));
    return clean + scale * rng.normal_vector(clean.size());
  }

  Vector weighted_data(int i, const ForwardOperatorA& op) const {
    int nr = bank_->n_rays();
    const auto& support = op.support();
    Vector d(static_cast<Eigen::Index>(support.size()) * nr);
    for (size_t k = 0; k < support.size(); ++k)
      d.segment(static_cast<Eigen::Index>(k) * nr, nr) =
          op.weights()[support[k]] *
          d_blocks_[static_cast<size_t>(i)][static_cast<size_t>(support[k])];
    return d;
  }

  const TrainingSet* ts_;
  OedConfig cfg_;
  std::shared_ptr<AngleBank> bank_;
  std::vector<std::vector<Vector>> d_blocks_;  // per sample, per angle (unweighted)
  double last_mse_ = 0.0;
};

// Free-angle empirical objective.  The per-sample noise vector and scale are
// frozen at construction; data at angles θ are M(θ) f_i + σ_i z_i, so the
// objective is a smooth, reproducible function of θ.
class EmpiricalObjectiveB {
 public:
  EmpiricalObjectiveB(const TrainingSet& ts, int ell, OedConfig cfg)
      : ts_(&ts), cfg_(std::move(cfg)), ell_(ell) {
    if (ell < 1) throw std::invalid_argument("EmpiricalObjectiveB: need >= 1 angle");
    n_rays_ = detail::rays_for(cfg_, ts.grid);
    SparseOperator T = build_projector(ts.grid, n_rays_);
    int N = ts.count();
    sigma_.resize(static_cast<size_t>(N));
    z_.resize(static_cast<size_t>(N));
    Rng root(cfg_.noise_seed);
    for (int i = 0; i < N; ++i) {
      Vector ref = T.apply(ts.images[static_cast<size_t>(i)].values);
      sigma_[static_cast<size_t>(i)] =
          cfg_.noise_level * ref.norm() / std::sqrt(static_cast<double>(n_rays_));
      z_[static_cast<size_t>(i)] =
          root.fork(static_cast<std::uint64_t>(i))
              .normal_vector(static_cast<Eigen::Index>(ell) * n_rays_);
    }
  }

  int num_params() const { return ell_; }
  int n_rays() const { return n_rays_; }
  const OedConfig& config() const { return cfg_; }
  double last_mse() const { return last_mse_; }

  PgEval evaluate(const Vector& angles, bool want_gradient) {
    if (angles.size() != ell_) throw std::invalid_argument("EmpiricalObjectiveB: size");
    std::vector<double> av(angles.data(), angles.data() + angles.size());
    ForwardOperatorB op(ts_->grid, n_rays_, av);
    SpMat M = op.to_sparse();
    const int N = ts_->count();
    const int n = ts_->grid.n();

    // Angle-derivative blocks, shared across samples.
    std::vector<SpMat> deriv_blocks;
    if (want_gradient) {
      SparseOperator T = build_projector(ts_->grid, n_rays_);
      deriv_blocks.reserve(static_cast<size_t>(ell_));
      for (int k = 0; k < ell_; ++k) {
        SpMat ad = T.matrix() * build_rotation_derivative(ts_->grid, av[static_cast<size_t>(k)])
                                    .matrix();
        ad.makeCompressed();
        deriv_blocks.push_back(std::move(ad));
      }
    }

    QpProblem P0 = QpProblem::from_operator(M, make_data(0, op), cfg_.alpha,
                                            detail::constraint_for(cfg_, ts_->images[0]),
                                            LMatrix::identity(), cfg_.prior_mean);
    LoweredConstraints C0(P0.constraints, n);
    auto ctx = std::make_shared<const oedtomo::detail::KktContext>(P0, C0);

    std::vector<double> obj(static_cast<size_t>(N)), mse(static_cast<size_t>(N));
    std::vector<Vector> grads(static_cast<size_t>(N));
    parallel_for(N, cfg_.workers, [&](int i) {
      const Image& f_true = ts_->images[static_cast<size_t>(i)];
      Vector d = make_data(i, op);
      QpProblem P = QpProblem::from_operator(M, d, cfg_.alpha,
                                             detail::constraint_for(cfg_, f_true),
                                             LMatrix::identity(), cfg_.prior_mean);
      QpSolution sol = solve_qp(P, cfg_.ip, nullptr, ctx.get());
      Vector diff = sol.f_hat - f_true.values;
      obj[static_cast<size_t>(i)] = 0.5 * diff.squaredNorm();
      mse[static_cast<size_t>(i)] = diff.squaredNorm() / n;
      if (want_gradient) {
        std::vector<Vector> dblocks(static_cast<size_t>(ell_));
        for (int k = 0; k < ell_; ++k)
          dblocks[static_cast<size_t>(k)] = d.segment(static_cast<Eigen::Index>(k) * n_rays_,
                                                      n_rays_);
        DesignRhs rhs = grad_rhs_problem_b_with_derivs(op, deriv_blocks, sol.f_hat, dblocks,
                                                       &f_true.values);
        SensitivityOperator sens(P, sol, std::move(rhs), ctx);
        grads[static_cast<size_t>(i)] = sens.vjp(diff);
      }
    });

    PgEval out;
    double J = 0.0, m = 0.0;
    for (int i = 0; i < N; ++i) {
      J += obj[static_cast<size_t>(i)];
      m += mse[static_cast<size_t>(i)];
    }
    out.objective = J / N;
    last_mse_ = m / N;
    if (want_gradient) {
      Vector g = Vector::Zero(ell_);
      for (int i = 0; i < N; ++i) g += grads[static_cast<size_t>(i)];
      out.gradient = g / N;
    }
    return out;
  }

  // Data for sample i at the operator's angles (frozen noise).
  Vector make_data(int i, const ForwardOperatorB& op) const {
    Vector clean = op.apply(ts_->images[static_cast<size_t>(i)].values);
    return clean + sigma_[static_cast<size_t>(i)] * z_[static_cast<size_t>(i)];
  }

 private:
  const TrainingSet* ts_;
  OedConfig cfg_;
  int ell_;
  int n_rays_ = 0;
  std::vector<double> sigma_;
  std::vector<Vector> z_;
  double last_mse_ = 0.0;
};

// Free-function wrappers for one-off objective evaluations.
inline std::pair<double, Vector> empirical_objective_a(const TrainingSet& ts,
                                                       const std::vector<double>& angles,
                                                       const Vector& p, const OedConfig& cfg) {
  EmpiricalObjectiveA obj(ts, angles, cfg);
  PgEval e = obj.evaluate(p, true);
  return {e.objective, e.gradient};
}

inline std::pair<double, Vector> empirical_objective_b(const TrainingSet& ts,
                                                       const Vector& angles,
                                                       const OedConfig& cfg) {
  EmpiricalObjectiveB obj(ts, static_cast<int>(angles.size()), cfg);
  PgEval e = obj.evaluate(angles, true);
  return {e.objective, e.gradient};
}

// Two-phase weighted-angle design: phase 1 minimizes J_N + β Σ p over p ≥ 0
// from p = e; angles with weight above support_threshold * max survive, and
// phase 2 refits the surviving weights with β = 0.  Throws when the l1 term
// eliminates every angle (over-regularized).
inline OedResult solve_oed_a(const TrainingSet& ts, const std::vector<double>& angles,
                             const OedConfig& cfg) {
  OedResult res;
  EmpiricalObjectiveA phase1(ts, angles, cfg);
  auto nonneg = [](const Vector& v) { return Vector(v.cwiseMax(0.0)); };
  PgResult r1 = projected_gradient(
      detail::guarded_objective([&](const Vector& x, bool g) { return phase1.evaluate(x, g); }),
      nonneg, Vector::Ones(static_cast<Eigen::Index>(angles.size())), cfg.outer);
  res.trace1 = r1.trace;

  double cut = cfg.support_threshold * r1.x.maxCoeff();
  for (int i = 0; i < r1.x.size(); ++i)
    if (r1.x[i] > cut) res.support.push_back(i);
  if (res.support.empty())
    throw NumericalError("solve_oed_a: all angles eliminated in phase 1 "
                         "(over-regularized; reduce beta)");
  for (int i : res.support) res.support_angles.push_back(angles[static_cast<size_t>(i)]);

  std::vector<double> sub_angles = res.support_angles;
  Vector x0(static_cast<Eigen::Index>(res.support.size()));
  for (size_t k = 0; k < res.support.size(); ++k) x0[static_cast<Eigen::Index>(k)] =
      r1.x[res.support[k]];
  OedConfig cfg2 = cfg;
  cfg2.beta = 0.0;
  EmpiricalObjectiveA phase2(ts, sub_angles, cfg2);
  PgResult r2 = projected_gradient(
      detail::guarded_objective([&](const Vector& x, bool g) { return phase2.evaluate(x, g); }),
      nonneg, x0, cfg2.outer);
  res.trace2 = r2.trace;

  res.p_opt = Vector::Zero(static_cast<Eigen::Index>(angles.size()));
  for (size_t k = 0; k < res.support.size(); ++k)
    res.p_opt[res.support[k]] = r2.x[static_cast<Eigen::Index>(k)];
  res.objective = r2.objective;
  res.mse = phase2.last_mse();
  res.iterations = r1.iterations + r2.iterations;
  res.converged = r1.converged && r2.converged;
  return res;
}

// Suffix sums: (∂p/∂δ)ᵀ g for the increment parameterization p_k = Σ_{j<=k} δ_j.
inline Vector increment_chain(const Vector& grad_p) {
  Vector g(grad_p.size());
  double acc = 0.0;
  for (Eigen::Index k = grad_p.size() - 1; k >= 0; --k) {
    acc += grad_p[k];
    g[k] = acc;
  }
  return g;
}

// Free-angle design via increments δ (δ ≥ 0, Σδ ≤ 180), which keeps the
// angle vector sorted in [0, 180] throughout.
inline OedResult solve_oed_b(const TrainingSet& ts, const std::vector<double>& start_angles,
                             const OedConfig& cfg) {
  int ell = static_cast<int>(start_angles.size());
  std::vector<double> sorted = start_angles;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 0 || sorted.back() > 180)
    throw std::invalid_argument("solve_oed_b: start angles outside [0, 180]");
  Vector delta0(ell);
  double prev = 0.0;
  for (int k = 0; k < ell; ++k) {
    delta0[k] = sorted[static_cast<size_t>(k)] - prev;
    prev = sorted[static_cast<size_t>(k)];
  }

  EmpiricalObjectiveB obj(ts, ell, cfg);
  auto eval_delta = [&](const Vector& delta, bool want_grad) {
    Vector p(ell);
    double acc = 0.0;
    for (int k = 0; k < ell; ++k) {
      acc += delta[k];
      p[k] = acc;
    }
    PgEval e = obj.evaluate(p, want_grad);
    if (want_grad) e.gradient = increment_chain(e.gradient);
    return e;
  };
  auto project = [](const Vector& v) { return project_capped_simplex(v, 180.0); };
  PgResult r = projected_gradient(detail::guarded_objective(eval_delta), project, delta0,
                                  cfg.outer);

  OedResult res;
  Vector p(ell);
  double acc = 0.0;
  for (int k = 0; k < ell; ++k) {
    acc += r.x[k];
    p[k] = acc;
    res.support_angles.push_back(p[k]);
  }
  res.p_opt = p;
  res.objective = r.objective;
  res.mse = obj.last_mse();
  res.trace1 = r.trace;
  res.iterations = r.iterations;
  res.converged = r.converged;
  return res;
}

// --- Scans and sweeps ----------------------------------------------------

enum class ScanMode { Empirical, Bayes };

struct ScanRow {
  double p1, p2, value;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  double best_p1 = 0, best_p2 = 0, best_value = 0;
};

// Evaluates the two-angle objective on the triangle {0 <= p2 <= p1 <= 180}
// at the given step (which must divide 180).  Empirical mode solves the
// constrained reconstructions with the Problem-B noise protocol; Bayes mode
// evaluates the closed-form risk with identity regularizer.  The first
// listed angle of a cell (p1) owns the first noise block.
inline ScanResult landscape_scan(const TrainingSet& ts, const OedConfig& cfg, double step_deg,
                                 ScanMode mode, double bayes_sigma = 1.0) {
  if (!(step_deg > 0)) throw std::invalid_argument("landscape_scan: step must be > 0");
  double cells_d = 180.0 / step_deg;
  int steps = static_cast<int>(std::lround(cells_d));
  if (std::abs(cells_d - steps) > 1e-9)
    throw std::invalid_argument("landscape_scan: step must divide 180");
  int K = steps + 1;
  std::vector<double> vals(static_cast<size_t>(K));
  for (int j = 0; j < K; ++j) vals[static_cast<size_t>(j)] = j * step_deg;

  int n_rays = detail::rays_for(cfg, ts.grid);
  AngleBank bank(ts.grid, n_rays, vals);
  const int N = ts.count();
  const int n = ts.grid.n();

  // Per-sample frozen noise (Problem-B protocol) and cached projections of
  // every sample through every grid angle.
  std::vector<double> sigma(static_cast<size_t>(N));
  std::vector<Vector> z(static_cast<size_t>(N));
  Rng root(cfg.noise_seed);
  for (int i = 0; i < N; ++i) {
    Vector ref = bank.projector().apply(ts.images[static_cast<size_t>(i)].values);
    sigma[static_cast<size_t>(i)] =
        cfg.noise_level * ref.norm() / std::sqrt(static_cast<double>(n_rays));
    z[static_cast<size_t>(i)] =
        root.fork(static_cast<std::uint64_t>(i)).normal_vector(2 * n_rays);
  }
  std::vector<std::vector<Vector>> proj(static_cast<size_t>(N));
  if (mode == ScanMode::Empirical) {
    for (int i = 0; i < N; ++i) {
      auto& pi = proj[static_cast<size_t>(i)];
      pi.resize(static_cast<size_t>(K));
      for (int v = 0; v < K; ++v)
        pi[static_cast<size_t>(v)] = bank.block(v).apply(ts.images[static_cast<size_t>(i)].values);
    }
  }

  std::vector<std::pair<int, int>> cells;
  for (int a = 0; a < K; ++a)
    for (int b = 0; b <= a; ++b) cells.emplace_back(a, b);

  std::vector<double> values(cells.size());
  parallel_for(static_cast<int>(cells.size()), cfg.workers, [&](int c) {
    auto [ia, ib] = cells[static_cast<size_t>(c)];
    std::vector<const SpMat*> blocks = {&bank.block(ia).matrix(), &bank.block(ib).matrix()};
    SpMat M = vstack(blocks, n);
    if (mode == ScanMode::Bayes) {
      values[static_cast<size_t>(c)] = bayes_risk_identityL(M, cfg.alpha, bayes_sigma);
      return;
    }
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      Vector d(2 * n_rays);
      d.head(n_rays) = proj[static_cast<size_t>(i)][static_cast<size_t>(ia)];
      d.tail(n_rays) = proj[static_cast<size_t>(i)][static_cast<size_t>(ib)];
      d += sigma[static_cast<size_t>(i)] * z[static_cast<size_t>(i)];
      QpProblem P = QpProblem::from_operator(M, d, cfg.alpha,
                                             detail::constraint_for(cfg, ts.images[static_cast<size_t>(i)]),
                                             LMatrix::identity(), cfg.prior_mean);
      QpSolution sol = solve_qp(P, cfg.ip);
      acc += 0.5 * (sol.f_hat - ts.images[static_cast<size_t>(i)].values).squaredNorm();
    }
    values[static_cast<size_t>(c)] = acc / N;
  });

  ScanResult res;
  res.rows.reserve(cells.size());
  bool first = true;
  for (size_t c = 0; c < cells.size(); ++c) {
    double p1 = vals[static_cast<size_t>(cells[c].first)];
    double p2 = vals[static_cast<size_t>(cells[c].second)];
    res.rows.push_back({p1, p2, values[c]});
    if (first || values[c] < res.best_value) {
      res.best_value = values[c];
      res.best_p1 = p1;
      res.best_p2 = p2;
      first = false;
    }
  }
  return res;
}

struct AlphaRow {
  double alpha;
  std::string constraint;
  double mse;
};

inline std::string constraint_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Unconstrained: return "unconstrained";
    case ConstraintKind::EqualitySum: return "equality";
    case ConstraintKind::NonNegative: return "nonneg";
    case ConstraintKind::Box: return "box";
    case ConstraintKind::General: return "general";
  }
  return "?";
}

inline std::vector<double> default_alpha_grid() {
  std::vector<double> a(20);
  for (int j = 0; j < 20; ++j) a[static_cast<size_t>(j)] = std::pow(10.0, -4.0 + 7.0 * j / 19.0);
  return a;
}

// Reconstruction error at a fixed angle design across regularization weights
// and constraint regimes.  Rows are ordered alpha-major in the given order
// of alphas, then regimes.
inline std::vector<AlphaRow> alpha_sweep(const TrainingSet& ts,
                                         const std::vector<double>& angles,
                                         const OedConfig& cfg,
                                         const std::vector<double>& alphas,
                                         const std::vector<ConstraintKind>& regimes) {
  if (angles.empty()) throw std::invalid_argument("alpha_sweep: no angles");
  int n_rays = detail::rays_for(cfg, ts.grid);
  ForwardOperatorB op(ts.grid, n_rays, angles);
  SpMat M = op.to_sparse();
  const int N = ts.count();
  const int n = ts.grid.n();
  int ell = static_cast<int>(angles.size());

  std::vector<Vector> data(static_cast<size_t>(N));
  Rng root(cfg.noise_seed);
  SparseOperator T = build_projector(ts.grid, n_rays);
  for (int i = 0; i < N; ++i) {
    Vector ref = T.apply(ts.images[static_cast<size_t>(i)].values);
    double sig = cfg.noise_level * ref.norm() / std::sqrt(static_cast<double>(n_rays));
    Vector zz = root.fork(static_cast<std::uint64_t>(i))
                    .normal_vector(static_cast<Eigen::Index>(ell) * n_rays);
    data[static_cast<size_t>(i)] = op.apply(ts.images[static_cast<size_t>(i)].values) + sig * zz;
  }

  std::vector<AlphaRow> rows;
  for (double alpha : alphas) {
    for (ConstraintKind kind : regimes) {
      OedConfig c = cfg;
      c.alpha = alpha;
      c.constraint = kind;
      QpProblem P0 = QpProblem::from_operator(M, data[0], alpha,
                                              detail::constraint_for(c, ts.images[0]),
                                              LMatrix::identity(), cfg.prior_mean);
      LoweredConstraints C0(P0.constraints, n);
      auto ctx = std::make_shared<const oedtomo::detail::KktContext>(P0, C0);
      std::vector<double> mse(static_cast<size_t>(N));
      parallel_for(N, cfg.workers, [&](int i) {
        QpProblem P = QpProblem::from_operator(M, data[static_cast<size_t>(i)], alpha,
                                               detail::constraint_for(c, ts.images[static_cast<size_t>(i)]),
                                               LMatrix::identity(), cfg.prior_mean);
        QpSolution sol = solve_qp(P, cfg.ip, nullptr, ctx.get());
        mse[static_cast<size_t>(i)] =
            (sol.f_hat - ts.images[static_cast<size_t>(i)].values).squaredNorm() / n;
      });
      double m = 0.0;
      for (int i = 0; i < N; ++i) m += mse[static_cast<size_t>(i)];
      rows.push_back({alpha, constraint_name(kind), m / N});
    }
  }
  return rows;
}

struct BetaRow {
  double beta;
  int support_size;
  double mse;
  std::vector<double> support_angles;
  OedResult result;
};

// Runs the two-phase weighted-angle design independently per β.
inline std::vector<BetaRow> beta_sweep(const TrainingSet& ts,
                                       const std::vector<double>& angles, const OedConfig& cfg,
                                       const std::vector<double>& betas) {
  std::vector<BetaRow> rows;
  for (double beta : betas) {
    OedConfig c = cfg;
    c.beta = beta;
    OedResult r = solve_oed_a(ts, angles, c);
    rows.push_back({beta, static_cast<int>(r.support.size()), r.mse, r.support_angles, r});
  }
  return rows;
}

}  // namespace oedtomo
