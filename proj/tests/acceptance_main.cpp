// Acceptance checks for the tomographic design-optimization artifact.
//
// Runs eleven end-to-end criteria — solver-vs-oracle equivalence, derivative
// correctness, closed-form risk consistency, angle-recovery experiments, and
// determinism — and prints exactly one [PASS]/[FAIL] line per criterion with
// the measured quantities.  Exit code is the number of failed criteria.
//
// Usage: acceptance [--criterion N]... [--out DIR]
// Expensive intermediate results (datasets, sweeps) are shared between
// criteria run in the same invocation; CSV artifacts are written under DIR
// (default "acceptance_out").

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <oedtomo/oedtomo.hpp>

#include "support/qp_family.hpp"
#include "support/qp_oracle.hpp"
#include "support/random_qp.hpp"

using namespace oedtomo;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
  return buf;
}

std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  return out.str();
}

std::string join_angles(const std::vector<double>& a) {
  std::string s;
  for (size_t i = 0; i < a.size(); ++i) s += (i ? ";" : "") + fmt_g17(a[i]);
  return s;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared experiment plumbing.  The angle-recovery and determinism criteria
// reuse datasets and sweep results; everything is memoized per worker count
// so the determinism criterion can replay the exact same computations.

class Acceptance {
 public:
  explicit Acceptance(std::string out_dir) : out_dir_(std::move(out_dir)) {
    fs::create_directories(out_dir_);
  }

  Outcome run(int id);

 private:
  std::string out_dir_;

  // -- datasets (deterministic; independent of worker count) ----------------
  const TrainingSet& rect40() {
    if (!rect40_) rect40_ = generate_dataset("rectangles", 20, Grid{40, 40}, 7);
    return *rect40_;
  }
  const TrainingSet& pent40() {
    if (!pent40_) pent40_ = generate_dataset("pentagons", 20, Grid{40, 40}, 7);
    return *pent40_;
  }

  // -- criterion 6/10: rectangles beta sweep --------------------------------
  // 20 rectangle images on a 40x40 grid, 10-degree angle grid, Box(0,1)
  // reconstruction constraints, 0.1% noise.
  static OedConfig rect_config(int workers) {
    OedConfig cfg;
    cfg.alpha = 1e-2;
    cfg.constraint = ConstraintKind::Box;
    cfg.box_lo = 0.0;
    cfg.box_hi = 1.0;
    cfg.noise_level = 1e-3;
    cfg.workers = workers;
    return cfg;
  }
  static std::vector<double> rect_angles() {
    std::vector<double> a;
    for (double v = 0; v < 180 - 1e-9; v += 10) a.push_back(v);
    return a;
  }
  static std::vector<double> sweep_betas() {
    return {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  }
  const std::vector<BetaRow>& rect_sweep(int workers) {
    auto it = rect_sweep_.find(workers);
    if (it == rect_sweep_.end())
      it = rect_sweep_
               .emplace(workers,
                        beta_sweep(rect40(), rect_angles(), rect_config(workers), sweep_betas()))
               .first;
    return it->second;
  }
  std::string rect_sweep_csv(int workers, bool fresh = false) {
    const std::vector<BetaRow>* rows;
    std::vector<BetaRow> local;
    if (fresh) {
      local = beta_sweep(rect40(), rect_angles(), rect_config(workers), sweep_betas());
      rows = &local;
    } else {
      rows = &rect_sweep(workers);
    }
    std::vector<std::vector<std::string>> csv;
    for (const BetaRow& r : *rows)
      csv.push_back({fmt_g17(r.beta), std::to_string(r.support_size), fmt_g17(r.mse),
                     join_angles(r.support_angles)});
    return csv_text({"beta", "support_size", "mse_per_pixel", "support_angles_deg"}, csv);
  }

  // -- criterion 7: pentagons on a 3-degree grid ----------------------------
  // NonNegative constraints; beta tuned over a short sweep to the value
  // whose phase-1 support has five angles.
  static OedConfig pent_config(int workers) {
    OedConfig cfg;
    cfg.alpha = 1e-2;
    cfg.constraint = ConstraintKind::NonNegative;
    cfg.noise_level = 1e-3;
    cfg.workers = workers;
    return cfg;
  }
  static std::vector<double> pent_angles() {
    std::vector<double> a;
    for (double v = 0; v < 180 - 1e-9; v += 3) a.push_back(v);
    return a;
  }
  static std::vector<double> pent_betas() { return {1e-4, 3e-4, 1e-3, 3e-3}; }
  std::string pent_csv(int workers, bool fresh = false) {
    auto it = pent_csv_.find(workers);
    if (!fresh && it != pent_csv_.end()) return it->second;
    std::vector<BetaRow> rows =
        beta_sweep(pent40(), pent_angles(), pent_config(workers), pent_betas());
    std::vector<std::vector<std::string>> csv;
    for (const BetaRow& r : rows)
      csv.push_back({fmt_g17(r.beta), std::to_string(r.support_size), fmt_g17(r.mse),
                     join_angles(r.support_angles)});
    std::string text =
        csv_text({"beta", "support_size", "mse_per_pixel", "support_angles_deg"}, csv);
    if (!fresh) pent_csv_.emplace(workers, text);
    if (!fresh) pent_rows_.emplace(workers, std::move(rows));
    return text;
  }
  const std::vector<BetaRow>& pent_rows(int workers) {
    pent_csv(workers);
    return pent_rows_.at(workers);
  }

  // -- criterion 8: Bayes landscape scan ------------------------------------
  // Identity regularizer, alpha = sigma = 1, 32x32 grid, 5-degree scan.
  std::string bayes_scan_csv(int workers, bool fresh = false) {
    auto it = bayes_csv_.find(workers);
    if (!fresh && it != bayes_csv_.end()) return it->second;
    TrainingSet ts = generate_dataset("rectangles", 1, Grid{32, 32}, 7);
    OedConfig cfg;
    cfg.alpha = 1.0;
    cfg.workers = workers;
    ScanResult scan = landscape_scan(ts, cfg, 5.0, ScanMode::Bayes, 1.0);
    std::vector<std::vector<std::string>> csv;
    for (const ScanRow& r : scan.rows)
      csv.push_back({fmt_g17(r.p1), fmt_g17(r.p2), fmt_g17(r.value)});
    std::string text = csv_text({"p1_deg", "p2_deg", "objective"}, csv);
    if (!fresh) {
      bayes_csv_.emplace(workers, text);
      bayes_scan_.emplace(workers, std::move(scan));
    }
    return text;
  }
  const ScanResult& bayes_scan(int workers) {
    bayes_scan_csv(workers);
    return bayes_scan_.at(workers);
  }

  // -- criterion 9: constraint benefit --------------------------------------
  // Per dataset family: pick the best two-angle design by an empirical
  // box-constrained 15-degree scan (10 images, 24x24), then sweep alpha for
  // the unconstrained and box-constrained reconstructions at that design and
  // compare the best MSE of each.
  std::string benefit_csv(int workers, bool fresh = false) {
    auto it = benefit_csv_.find(workers);
    if (!fresh && it != benefit_csv_.end()) return it->second;
    std::vector<std::vector<std::string>> csv;
    for (const std::string kind : {"rectangles", "pentagons"}) {
      TrainingSet ts = generate_dataset(kind, 10, Grid{24, 24}, 7);
      OedConfig cfg;
      cfg.alpha = 1e-2;
      cfg.constraint = ConstraintKind::Box;
      cfg.box_lo = 0.0;
      cfg.box_hi = 1.0;
      cfg.noise_level = 1e-3;
      cfg.workers = workers;
      ScanResult scan = landscape_scan(ts, cfg, 15.0, ScanMode::Empirical);
      std::vector<double> design = {scan.best_p2, scan.best_p1};
      std::vector<AlphaRow> rows =
          alpha_sweep(ts, design, cfg, default_alpha_grid(),
                      {ConstraintKind::Unconstrained, ConstraintKind::Box});
      for (const AlphaRow& r : rows)
        csv.push_back({kind, fmt_g17(scan.best_p1), fmt_g17(scan.best_p2), r.constraint,
                       fmt_g17(r.alpha), fmt_g17(r.mse)});
    }
    std::string text =
        csv_text({"dataset", "p1_deg", "p2_deg", "constraint", "alpha", "mse_per_pixel"}, csv);
    if (!fresh) benefit_csv_.emplace(workers, text);
    return text;
  }

  void write_artifact(const std::string& name, const std::string& text) const {
    std::ofstream out(out_dir_ + "/" + name, std::ios::binary);
    out << text;
  }

  Outcome c1_qp_oracle();
  Outcome c2_sensitivity();
  Outcome c3_risk_formulas();
  Outcome c4_pi_lemma();
  Outcome c5_outer_gradient();
  Outcome c6_rectangles();
  Outcome c7_pentagons();
  Outcome c8_bayes_minimum();
  Outcome c9_constraint_benefit();
  Outcome c10_beta_monotone();
  Outcome c11_determinism();

  std::optional<TrainingSet> rect40_, pent40_;
  std::map<int, std::vector<BetaRow>> rect_sweep_;
  std::map<int, std::vector<BetaRow>> pent_rows_;
  std::map<int, std::string> pent_csv_;
  std::map<int, ScanResult> bayes_scan_;
  std::map<int, std::string> bayes_csv_;
  std::map<int, std::string> benefit_csv_;
};

// --------------------------------------------------------------- criterion 1
// Interior-point solutions match active-set enumeration on 200 random
// strictly convex QPs (n <= 8, up to 16 inequalities, optional equality row).
Outcome Acceptance::c1_qp_oracle() {
  auto t0 = Clock::now();
  Rng rng(20240801);
  IpOptions opts;
  opts.tol = 1e-10;
  opts.max_iter = 100;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    int n = rng.uniform_int(2, 8);
    int mi = rng.uniform_int(0, 16);
    oracle::DenseQp qp = oracle::random_qp(rng, n, mi, t % 2 == 1);
    auto want = oracle::solve_active_set(qp);
    if (!want)
      return {false, "active-set oracle failed on trial " + std::to_string(t)};
    QpSolution sol = solve_qp(oracle::to_problem(qp), opts);
    worst = std::max(worst, (sol.f_hat - want->f).lpNorm<Eigen::Infinity>());
  }
  double el = seconds_since(t0);
  bool pass = worst <= 1e-6 && el < 30.0;
  return {pass, "200 random QPs vs active-set oracle, max |df|_inf = " + fmt(worst) +
                    " (tol 1e-6), " + fmt(el) + " s (budget 30 s)"};
}

// --------------------------------------------------------------- criterion 2
// Implicit-differentiation Jacobian of the solution map matches central
// finite differences on 50 constrained instances at strict complementarity;
// jvp/vjp satisfy the adjoint identity.
Outcome Acceptance::c2_sensitivity() {
  auto t0 = Clock::now();
  Rng rng(20240802);
  IpOptions opts;
  opts.tol = 1e-12;
  opts.max_iter = 200;
  const double h = 1e-5;
  int tested = 0, attempts = 0;
  double worst_fd = 0.0, worst_adj = 0.0;
  while (tested < 50 && attempts < 600) {
    ++attempts;
    int n = rng.uniform_int(2, 6);
    int ell = rng.uniform_int(1, 3);
    int regime = 1 + attempts % 4;  // constrained regimes only
    family::QpFamily fam = family::random_family(rng, n, ell, regime);
    Vector p = Vector::NullaryExpr(ell, [&](Eigen::Index) { return rng.uniform(0.6, 1.4); });
    QpProblem P = fam.at(p);
    QpSolution sol;
    try {
      sol = solve_qp(P, opts);
    } catch (const NumericalError&) {
      continue;
    }
    SensitivityOperator S(P, sol, fam.rhs_at(sol.f_hat));
    if (S.degenerate() || S.strict_complementarity_margin() < 1e-3)
      continue;  // not strictly complementary at solver precision

    Matrix J_an(n, ell), J_fd(n, ell);
    for (int k = 0; k < ell; ++k) {
      J_an.col(k) = S.jvp(Vector::Unit(ell, k));
      Vector fp = solve_qp(fam.at(p + h * Vector::Unit(ell, k)), opts).f_hat;
      Vector fm = solve_qp(fam.at(p - h * Vector::Unit(ell, k)), opts).f_hat;
      J_fd.col(k) = (fp - fm) / (2 * h);
    }
    worst_fd = std::max(worst_fd, (J_an - J_fd).norm() / (1.0 + J_fd.norm()));

    for (int r = 0; r < 3; ++r) {
      Vector y = rng.normal_vector(n);
      Vector dp = rng.normal_vector(ell);
      double lhs = y.dot(S.jvp(dp));
      double rhs = S.vjp(y).dot(dp);
      worst_adj = std::max(worst_adj, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
    }
    ++tested;
  }
  double el = seconds_since(t0);
  bool pass = tested >= 50 && worst_fd <= 1e-4 && worst_adj <= 1e-10 && el < 60.0;
  return {pass, std::to_string(tested) + " strict-complementarity instances, max FD rel = " +
                    fmt(worst_fd) + " (tol 1e-4), max adjoint rel = " + fmt(worst_adj) +
                    " (tol 1e-10), " + fmt(el) + " s (budget 60 s)"};
}

// --------------------------------------------------------------- criterion 3
// Spectrum risk formula (with the (n-r)/alpha^2 null-space tail) equals the
// direct pseudoinverse Frobenius evaluation on 100 random matrices,
// rank-deficient ones included.
Outcome Acceptance::c3_risk_formulas() {
  auto t0 = Clock::now();
  Rng rng(20240803);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    int rows = rng.uniform_int(3, 10);
    int cols = rng.uniform_int(3, 8);
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) M(i, j) = rng.normal();
    switch (t % 4) {
      case 1:  // exactly repeated column
        if (cols >= 2) M.col(cols - 1) = M.col(0);
        break;
      case 2:  // dead measurement rows
        M.topRows(std::min(rows, 2)).setZero();
        break;
      case 3:  // entire operator vanishes
        M.setZero();
        break;
      default: break;
    }
    double alpha = std::pow(10.0, rng.uniform(-2.0, 1.0));
    double sigma = std::pow(10.0, rng.uniform(-0.3, 0.3));
    double direct = bayes_risk_frobenius(M, LMatrix::identity(), alpha, sigma);
    double spectral = bayes_risk_spectrum_identityL(operator_singular_values(M.sparseView()),
                                                    cols, alpha, sigma);
    worst = std::max(worst, std::abs(direct - spectral) / (1.0 + std::abs(direct)));
  }
  double el = seconds_since(t0);
  bool pass = worst <= 1e-10 && el < 10.0;
  return {pass, "100 random matrices (incl. rank-deficient), max rel gap = " + fmt(worst) +
                    " (tol 1e-10), " + fmt(el) + " s (budget 10 s)"};
}

// --------------------------------------------------------------- criterion 4
// The fast per-angle-spectrum risk path agrees with the exact eigensolve on
// commuting Gram families; a non-commuting pair is detected and reported.
Outcome Acceptance::c4_pi_lemma() {
  auto t0 = Clock::now();
  Rng rng(20240804);
  double worst = 0.0;
  for (int t = 0; t < 8; ++t) {
    int n = rng.uniform_int(3, 6);
    int ell = rng.uniform_int(2, 4);
    // Shared right singular basis V => the Gram blocks commute.
    Matrix G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) G(i, j) = rng.normal();
    Matrix V = Eigen::HouseholderQR<Matrix>(G).householderQ();
    std::vector<SpMat> blocks;
    std::vector<Matrix> grams;
    for (int k = 0; k < ell; ++k) {
      Vector d(n);
      for (int i = 0; i < n; ++i) d[i] = (i + k) % 3 == 0 ? 0.0 : rng.uniform(0.2, 2.0);
      Matrix A = d.cwiseSqrt().asDiagonal() * V.transpose();
      blocks.push_back(A.sparseView());
      grams.push_back(A.transpose() * A);
    }
    SpectralCache cache = build_pi(grams);
    if (!cache.commuting)
      return {false, "commuting family flagged non-commuting (leakage " +
                         fmt(cache.max_offdiag_rel) + ")"};
    Vector p = Vector::NullaryExpr(ell, [&](Eigen::Index) { return rng.uniform(0.2, 1.5); });
    double alpha = 0.3, sigma = 1.0;
    auto [jf, gf] = risk_and_gradient_a(cache, p, alpha, sigma);
    auto [je, ge] = exact_risk_and_gradient_a(blocks, p, alpha, sigma);
    worst = std::max(worst, std::abs(jf - je) / (1.0 + std::abs(je)));
    worst = std::max(worst, (gf - ge).norm() / (1.0 + ge.norm()));
  }

  // Rank-one projections along two different directions do not commute.
  auto proj = [](double t) {
    Matrix A(1, 2);
    A << std::cos(t), std::sin(t);
    return A;
  };
  std::vector<Matrix> grams = {proj(0.3).transpose() * proj(0.3),
                               proj(1.1).transpose() * proj(1.1)};
  SpectralCache bad = build_pi(grams);
  bool detected = !bad.commuting && bad.max_offdiag_rel > 1e-8;
  bool reported = false;
  try {
    risk_and_gradient_a(bad, Vector::Ones(2), 0.3, 1.0);
  } catch (const NumericalError& e) {
    reported = std::string(e.what()).find("not commuting") != std::string::npos;
  }
  // The forced fast path is genuinely wrong there (unequal weights).
  std::vector<SpMat> bad_blocks = {proj(0.3).sparseView(), proj(1.1).sparseView()};
  Vector pu(2);
  pu << 1.0, 0.4;
  auto [jfo, gfo] = risk_and_gradient_a(bad, pu, 0.3, 1.0, 0.0, true);
  auto [jex, gex] = exact_risk_and_gradient_a(bad_blocks, pu, 0.3, 1.0);
  (void)gfo;
  (void)gex;
  bool discrepancy = std::abs(jfo - jex) > 1e-6;

  double el = seconds_since(t0);
  bool pass = worst <= 1e-9 && detected && reported && discrepancy && el < 10.0;
  return {pass, "commuting families max rel gap = " + fmt(worst) +
                    " (tol 1e-9); non-commuting pair detected (leakage " +
                    fmt(bad.max_offdiag_rel) + "), reported=" + (reported ? "yes" : "no") +
                    ", forced-path discrepancy = " + fmt(std::abs(jfo - jex)) + ", " + fmt(el) +
                    " s (budget 10 s)"};
}

// --------------------------------------------------------------- criterion 5
// The assembled design gradient of the sample-average objective (implicit
// differentiation through every reconstruction) matches central finite
// differences on an 8x8 Problem-A instance with nonnegativity constraints.
Outcome Acceptance::c5_outer_gradient() {
  auto t0 = Clock::now();
  TrainingSet ts = generate_dataset("rectangles", 3, Grid{8, 8}, 31);
  std::vector<double> angles = {0.0, 30.0, 60.0, 90.0, 120.0, 150.0};
  OedConfig cfg;
  cfg.alpha = 1e-2;
  cfg.constraint = ConstraintKind::NonNegative;
  cfg.noise_level = 0.01;
  cfg.beta = 0.01;
  cfg.workers = 1;
  cfg.ip.tol = 1e-11;
  cfg.ip.max_iter = 200;

  EmpiricalObjectiveA obj(ts, angles, cfg);
  Vector p(6);
  for (int k = 0; k < 6; ++k) p[k] = 1.0 + 0.1 * ((k % 3) - 1);
  PgEval e = obj.evaluate(p, true);

  const double h = 1e-5;
  Vector fd(6);
  for (int k = 0; k < 6; ++k) {
    Vector ek = Vector::Unit(6, k);
    fd[k] = (obj.evaluate(p + h * ek, false).objective -
             obj.evaluate(p - h * ek, false).objective) /
            (2 * h);
  }
  double rel = (e.gradient - fd).norm() / fd.norm();
  double el = seconds_since(t0);
  bool pass = rel <= 1e-3 && el < 120.0;
  return {pass, "8x8 grid, N=3, nonneg: |grad - fd| / |fd| = " + fmt(rel) +
                    " (tol 1e-3), " + fmt(el) + " s (budget 2 min)"};
}

// --------------------------------------------------------------- criterion 6
// Rectangles angle recovery: after tuning beta on the sweep, the phase-1
// support is exactly {0, 90} degrees.
Outcome Acceptance::c6_rectangles() {
  auto t0 = Clock::now();
  const std::vector<BetaRow>& rows = rect_sweep(4);
  write_artifact("rect_beta_sweep.csv", rect_sweep_csv(4));

  // Tuned beta: smallest beta whose phase-1 support has exactly two angles;
  // if none reaches two, the closest support size wins.
  const BetaRow* tuned = nullptr;
  for (const BetaRow& r : rows) {
    if (!tuned || std::abs(r.support_size - 2) < std::abs(tuned->support_size - 2))
      tuned = &r;
  }
  double el = seconds_since(t0);
  if (!tuned) return {false, "beta sweep produced no rows"};
  bool pass = tuned->support_angles == std::vector<double>{0.0, 90.0};
  return {pass, "tuned beta = " + fmt(tuned->beta) + ", support = {" +
                    join_angles(tuned->support_angles) + "} (want {0;90}), " + fmt(el) +
                    " s (target 15 min on 4 workers)"};
}

// --------------------------------------------------------------- criterion 7
// Pentagons angle recovery: five support angles within 3 degrees of the
// pentagon edge-normal directions 27+36k.
Outcome Acceptance::c7_pentagons() {
  auto t0 = Clock::now();
  const std::vector<BetaRow>& rows = pent_rows(4);
  write_artifact("pentagon_beta_sweep.csv", pent_csv(4));
  const std::vector<double> target = {27.0, 63.0, 99.0, 135.0, 171.0};

  const BetaRow* tuned = nullptr;
  for (const BetaRow& r : rows)
    if (!tuned || std::abs(r.support_size - 5) < std::abs(tuned->support_size - 5))
      tuned = &r;
  double el = seconds_since(t0);
  if (!tuned) return {false, "beta sweep produced no rows"};

  bool pass = tuned->support_angles.size() == 5;
  double worst = 0.0;
  if (pass) {
    for (size_t i = 0; i < 5; ++i)
      worst = std::max(worst, std::abs(tuned->support_angles[i] - target[i]));
    pass = worst <= 3.0;
  }
  return {pass, "tuned beta = " + fmt(tuned->beta) + ", support = {" +
                    join_angles(tuned->support_angles) + "} vs {27;63;99;135;171} +- 3 deg" +
                    (tuned->support_angles.size() == 5
                         ? ", max deviation = " + fmt(worst) + " deg"
                         : "") +
                    ", " + fmt(el) + " s (target 30 min)"};
}

// --------------------------------------------------------------- criterion 8
// Closed-form Bayes landscape on the 32x32 grid, alpha = sigma = 1: the scan
// minimum is checked against the (45, 135) reference location.
Outcome Acceptance::c8_bayes_minimum() {
  auto t0 = Clock::now();
  const ScanResult& scan = bayes_scan(4);
  write_artifact("bayes_scan.csv", bayes_scan_csv(4));
  double d = std::max(std::abs(scan.best_p1 - 135.0), std::abs(scan.best_p2 - 45.0));
  double el = seconds_since(t0);
  bool pass = d <= 15.0 && el < 600.0;
  return {pass, "scan minimum at (" + fmt(scan.best_p1) + ", " + fmt(scan.best_p2) +
                    "), value " + fmt(scan.best_value, 6) + ", distance to (135, 45) = " +
                    fmt(d) + " deg (tol 15), " + fmt(el) + " s (budget 10 min)"};
}

// --------------------------------------------------------------- criterion 9
// Box-constrained reconstruction beats the unconstrained one by at least 20%
// in best-alpha MSE at the scan-optimal two-angle design of each dataset.
Outcome Acceptance::c9_constraint_benefit() {
  auto t0 = Clock::now();
  std::string csv = benefit_csv(4);
  write_artifact("constraint_benefit.csv", csv);

  // Parse the memoized table: per dataset, best MSE per constraint.
  std::map<std::string, std::map<std::string, double>> best;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string dataset, p1, p2, constraint, alpha, mse;
    std::getline(ss, dataset, ',');
    std::getline(ss, p1, ',');
    std::getline(ss, p2, ',');
    std::getline(ss, constraint, ',');
    std::getline(ss, alpha, ',');
    std::getline(ss, mse, ',');
    double v = std::stod(mse);
    auto& slot = best[dataset];
    if (!slot.count(constraint) || v < slot[constraint]) slot[constraint] = v;
  }
  bool pass = true;
  std::string note;
  for (const auto& [dataset, per] : best) {
    double unc = per.at("unconstrained"), box = per.at("box");
    double gain = 1.0 - box / unc;
    pass = pass && box < unc && gain >= 0.20;
    note += dataset + ": box " + fmt(box) + " vs unconstrained " + fmt(unc) + " (gain " +
            fmt(100 * gain) + "%); ";
  }
  double el = seconds_since(t0);
  pass = pass && el < 600.0;
  return {pass, note + "need >= 20%, " + fmt(el) + " s (budget 10 min)"};
}

// -------------------------------------------------------------- criterion 10
// Over the six-point beta sweep the support size at the largest beta is no
// larger than at the smallest, strictly smaller unless already at the floor.
Outcome Acceptance::c10_beta_monotone() {
  auto t0 = Clock::now();
  const std::vector<BetaRow>& rows = rect_sweep(4);
  write_artifact("rect_beta_sweep.csv", rect_sweep_csv(4));
  int s_first = rows.front().support_size;
  int s_last = rows.back().support_size;
  int floor_size = s_first;
  for (const BetaRow& r : rows) floor_size = std::min(floor_size, r.support_size);
  std::string sizes;
  for (const BetaRow& r : rows)
    sizes += (sizes.empty() ? "" : ",") + std::to_string(r.support_size);
  double el = seconds_since(t0);
  bool pass = s_last <= s_first && (s_last < s_first || s_last == floor_size) && el < 1200.0;
  return {pass, "support sizes over betas {" + sizes + "}: first = " +
                    std::to_string(s_first) + ", last = " + std::to_string(s_last) +
                    ", floor = " + std::to_string(floor_size) + ", " + fmt(el) +
                    " s (budget 20 min)"};
}

// -------------------------------------------------------------- criterion 11
// The experiment CSVs behind criteria 6-10 are byte-identical across repeated
// runs and across worker counts 1 and 4.
Outcome Acceptance::c11_determinism() {
  auto t0 = Clock::now();
  struct Check {
    const char* name;
    std::string w4, w4_repeat, w1;
  };
  std::vector<Check> checks;
  checks.push_back({"rect-beta-sweep", rect_sweep_csv(4), rect_sweep_csv(4, true),
                    rect_sweep_csv(1)});
  checks.push_back({"pentagon-design", pent_csv(4), pent_csv(4, true), pent_csv(1)});
  checks.push_back({"bayes-scan", bayes_scan_csv(4), bayes_scan_csv(4, true),
                    bayes_scan_csv(1)});
  checks.push_back({"constraint-benefit", benefit_csv(4), benefit_csv(4, true),
                    benefit_csv(1)});
  std::string bad;
  for (const Check& c : checks) {
    if (c.w4 != c.w4_repeat) bad += std::string(c.name) + " differs across runs; ";
    if (c.w4 != c.w1) bad += std::string(c.name) + " differs across worker counts; ";
  }
  double el = seconds_since(t0);
  if (!bad.empty()) return {false, bad + fmt(el) + " s"};
  return {true, "4 experiment tables byte-identical across runs and workers {1, 4}, " +
                    fmt(el) + " s"};
}

Outcome Acceptance::run(int id) {
  switch (id) {
    case 1: return c1_qp_oracle();
    case 2: return c2_sensitivity();
    case 3: return c3_risk_formulas();
    case 4: return c4_pi_lemma();
    case 5: return c5_outer_gradient();
    case 6: return c6_rectangles();
    case 7: return c7_pentagons();
    case 8: return c8_bayes_minimum();
    case 9: return c9_constraint_benefit();
    case 10: return c10_beta_monotone();
    case 11: return c11_determinism();
    default: return {false, "unknown criterion"};
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  std::string out_dir = "acceptance_out";
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      selected.push_back(std::atoi(argv[++i]));
    } else if (arg == "--out" && i + 1 < argc) {
      out_dir = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]... [--out DIR]\n", argv[0]);
      return 2;
    }
  }
  if (selected.empty())
    for (int i = 1; i <= 11; ++i) selected.push_back(i);

  Acceptance acc(out_dir);
  int failures = 0;
  for (int id : selected) {
    Outcome o;
    try {
      o = acc.run(id);
    } catch (const std::exception& e) {
      o = {false, std::string("unexpected error: ") + e.what()};
    }
    std::printf("[%s] criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures;
}
