#pragma once

// Projected gradient descent for the outer design problems: monotone Armijo
// backtracking line search with a Barzilai-Borwein initial step, plus the
// projections used by the two design parameterizations.

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "core.hpp"

namespace oedtomo {

struct PgOptions {
  int max_iter = 200;
  double tol = 1e-6;          // on the unit-step projected gradient residual
  double armijo_c = 1e-4;
  int max_backtracks = 40;
  double step_min = 1e-14;
  double step_max = 1e8;
  double step_growth = 1e4;  // max trial-step growth per accepted step
};

struct PgEval {
  double objective = 0.0;
  Vector gradient;  // empty when not requested
};

struct PgResult {
  Vector x;
  double objective = 0.0;
  Vector gradient;
  std::vector<double> trace;  // accepted objective values, non-increasing
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

// Minimizes obj over the convex set given by project.  obj(x, want_gradient)
// must be deterministic; the gradient is required only on accepted points and
// the first trial of each line search.
inline PgResult projected_gradient(
    const std::function<PgEval(const Vector&, bool)>& obj,
    const std::function<Vector(const Vector&)>& project, Vector x0,
    const PgOptions& opts = {}) {
  PgResult res;
  Vector x = project(std::move(x0));
  PgEval cur = obj(x, true);
  if (cur.gradient.size() != x.size())
    throw std::invalid_argument("projected_gradient: objective returned no gradient");
  res.trace.push_back(cur.objective);

  double t = 1.0 / (1.0 + cur.gradient.cwiseAbs().maxCoeff());
  double t_acc = t;  // last accepted step, bounds how fast trials may grow
  Vector x_prev, g_prev;

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    Vector pg = x - project(x - cur.gradient);
    if (pg.cwiseAbs().maxCoeff() <= opts.tol) {
      res.converged = true;
      res.stop_reason = "projected gradient below tolerance";
      break;
    }

    // Barzilai-Borwein step from the previous accepted pair.
    if (x_prev.size()) {
      Vector dx = x - x_prev;
      Vector dg = cur.gradient - g_prev;
      double num = dx.squaredNorm();
      double den = dx.dot(dg);
      t = den > 0 ? std::clamp(num / den, opts.step_min, opts.step_max)
                  : std::min(t * 4.0, opts.step_max);
      t = std::min(t, opts.step_growth * t_acc);
    }

    bool accepted = false;
    Vector xt;
    PgEval trial;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      xt = project(x - t * cur.gradient);
      double pred = cur.gradient.dot(x - xt);
      if (pred <= 0) break;  // no feasible descent along this direction
      bool first = bt == 0;
      trial = obj(xt, first);  // gradient piggybacks on the likely-accepted trial
      if (trial.objective <= cur.objective - opts.armijo_c * pred) {
        if (!first || trial.gradient.size() == 0) {
          double certified = trial.objective;
          trial = obj(xt, true);
          trial.objective = certified;  // warm starts may wobble a re-evaluation
        }
        accepted = true;
        break;
      }
      t *= 0.5;
      if (t < opts.step_min) break;
    }
    if (!accepted) {
      res.stop_reason = "line search found no descent";
      break;
    }
    t_acc = t;
    x_prev = x;
    g_prev = cur.gradient;
    x = xt;
    cur = trial;
    res.trace.push_back(cur.objective);
  }
  if (res.stop_reason.empty()) res.stop_reason = "iteration limit reached";
  res.x = x;
  res.objective = cur.objective;
  res.gradient = cur.gradient;
  return res;
}

// Euclidean projection onto { y >= 0, sum(y) <= cap }: clip to the positive
// orthant, and if the sum still exceeds the cap, project onto the simplex
// { y >= 0, sum(y) = cap } by the sorted-threshold rule.
inline Vector project_capped_simplex(const Vector& v, double cap) {
  if (cap < 0) throw std::invalid_argument("project_capped_simplex: negative cap");
  if (cap == 0) return Vector::Zero(v.size());
  Vector y = v.cwiseMax(0.0);
  if (y.sum() <= cap) return y;
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  int rho = 0;
  for (size_t i = 0; i < u.size(); ++i) {
    css += u[i];
    double th = (css - cap) / static_cast<double>(i + 1);
    if (u[i] - th > 0) {
      rho = static_cast<int>(i + 1);
      theta = th;
    }
  }
  (void)rho;
  return (v.array() - theta).cwiseMax(0.0);
}

}  // namespace oedtomo
