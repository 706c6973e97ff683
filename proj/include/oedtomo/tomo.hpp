#pragma once

// Parallel-beam forward modeling on pixel grids: axis-aligned projector,
// bilinear image rotation (with analytic angle derivative), and the stacked
// forward operators for weighted-angle and free-angle designs.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "core.hpp"

namespace oedtomo {

// Projector for vertical rays at angle 0: ray r is the vertical line
// x = (r + 1/2) * width / n_rays - 1/2 in pixel-center coordinates, and each
// entry is the exact intersection length of that line with a unit pixel.
// When n_rays == width the rays pass through pixel-center columns and the
// matrix sums each column of the image with unit weights.
inline SparseOperator build_projector(const Grid& grid, int n_rays) {
  if (n_rays < 1) throw std::invalid_argument("build_projector: n_rays must be >= 1");
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(n_rays) * static_cast<size_t>(grid.height));
  for (int r = 0; r < n_rays; ++r) {
    double x = (r + 0.5) * static_cast<double>(grid.width) / n_rays - 0.5;
    // The vertical line at x crosses pixel column j iff j-1/2 <= x < j+1/2;
    // the intersection length with each pixel of that column is 1.
    int j = static_cast<int>(std::floor(x + 0.5));
    if (j < 0 || j >= grid.width) continue;
    for (int i = 0; i < grid.height; ++i)
      trips.emplace_back(r, grid.index(i, j), 1.0);
  }
  return SparseOperator(n_rays, grid.n(), trips);
}

namespace detail {

// Pull-back coordinates for a counterclockwise rotation by theta about the
// grid center: output pixel (i, j) samples the input at
//   u = cx + cos(t)*(j - cx) + sin(t)*(i - cy)
//   v = cy - sin(t)*(j - cx) + cos(t)*(i - cy)
struct RotSample {
  double u, v;      // sample point in input pixel coordinates
  double du, dv;    // d(u,v)/dtheta in radians
};

inline RotSample rot_sample(const Grid& g, double s, double c, int i, int j) {
  double dx = j - g.center_x();
  double dy = i - g.center_y();
  RotSample r;
  r.u = g.center_x() + c * dx + s * dy;
  r.v = g.center_y() - s * dx + c * dy;
  r.du = r.v - g.center_y();
  r.dv = -(r.u - g.center_x());
  return r;
}

}  // namespace detail

// Rotation operator: bilinear interpolation of the pulled-back sample point,
// zero padding outside the grid.  Entries lie in [0, 1]; each row sums to at
// most 1, and exactly 1 when the sample point falls inside the grid.
// Rotations by multiples of 90 degrees are exact permutations.
inline SparseOperator build_rotation(const Grid& grid, double theta_deg) {
  double s, c;
  sincos_deg(theta_deg, s, c);
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(grid.n()) * 4);
  for (int i = 0; i < grid.height; ++i) {
    for (int j = 0; j < grid.width; ++j) {
      auto rs = detail::rot_sample(grid, s, c, i, j);
      int j0 = static_cast<int>(std::floor(rs.u));
      int i0 = static_cast<int>(std::floor(rs.v));
      double fx = rs.u - j0;
      double fy = rs.v - i0;
      int row = grid.index(i, j);
      const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      const int ii[4] = {i0, i0, i0 + 1, i0 + 1};
      const int jj[4] = {j0, j0 + 1, j0, j0 + 1};
      for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0) continue;
        if (ii[k] < 0 || ii[k] >= grid.height || jj[k] < 0 || jj[k] >= grid.width) continue;
        trips.emplace_back(row, grid.index(ii[k], jj[k]), w[k]);
      }
    }
  }
  return SparseOperator(grid.n(), grid.n(), trips);
}

enum class RotationDerivativeMode {
  Analytic,          // differentiate the bilinear weights on their smooth pieces
  FiniteDifference,  // centered difference of build_rotation with h = 1e-4 deg
  Checked            // compute both; throw if they disagree (kink crossing)
};

namespace detail {

inline SpMat rotation_derivative_analytic(const Grid& grid, double theta_deg,
                                          double* kink_fraction) {
  double s, c;
  sincos_deg(theta_deg, s, c);
  const double scale = kPi / 180.0;  // derivative is per degree
  const double guard = 1e-9;
  int kinks = 0;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(grid.n()) * 4);
  for (int i = 0; i < grid.height; ++i) {
    for (int j = 0; j < grid.width; ++j) {
      auto rs = rot_sample(grid, s, c, i, j);
      int j0 = static_cast<int>(std::floor(rs.u));
      int i0 = static_cast<int>(std::floor(rs.v));
      double fx = rs.u - j0;
      double fy = rs.v - i0;
      if (std::min(fx, 1 - fx) < guard || std::min(fy, 1 - fy) < guard) ++kinks;
      double du = rs.du * scale;
      double dv = rs.dv * scale;
      int row = grid.index(i, j);
      // d/dtheta of the four bilinear weights, with fx' = du, fy' = dv.
      const double w[4] = {-du * (1 - fy) - dv * (1 - fx), du * (1 - fy) - dv * fx,
                           -du * fy + dv * (1 - fx), du * fy + dv * fx};
      const int ii[4] = {i0, i0, i0 + 1, i0 + 1};
      const int jj[4] = {j0, j0 + 1, j0, j0 + 1};
      for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0) continue;
        if (ii[k] < 0 || ii[k] >= grid.height || jj[k] < 0 || jj[k] >= grid.width) continue;
        trips.emplace_back(row, grid.index(ii[k], jj[k]), w[k]);
      }
    }
  }
  if (kink_fraction)
    *kink_fraction = static_cast<double>(kinks) / grid.n();
  SpMat out(grid.n(), grid.n());
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

inline SpMat rotation_derivative_fd(const Grid& grid, double theta_deg) {
  const double h = 1e-4;
  SpMat plus = build_rotation(grid, theta_deg + h).matrix();
  SpMat minus = build_rotation(grid, theta_deg - h).matrix();
  SpMat diff = plus - minus;
  diff *= 1.0 / (2 * h);
  diff.prune(0.0, 0.0);
  return diff;
}

}  // namespace detail

// d/dtheta (in degrees) of the rotation operator.  The analytic path
// differentiates the bilinear weights; it is exact except on the measure-zero
// set of angles where a sample point crosses a pixel boundary (a kink in the
// piecewise-smooth entries).  Checked mode cross-validates against a centered
// finite difference and throws on relative disagreement > 1e-3.
inline SparseOperator build_rotation_derivative(
    const Grid& grid, double theta_deg,
    RotationDerivativeMode mode = RotationDerivativeMode::Analytic,
    double* kink_fraction = nullptr) {
  switch (mode) {
    case RotationDerivativeMode::Analytic:
      return SparseOperator(detail::rotation_derivative_analytic(grid, theta_deg, kink_fraction));
    case RotationDerivativeMode::FiniteDifference:
      return SparseOperator(detail::rotation_derivative_fd(grid, theta_deg));
    case RotationDerivativeMode::Checked: {
      SpMat a = detail::rotation_derivative_analytic(grid, theta_deg, kink_fraction);
      SpMat f = detail::rotation_derivative_fd(grid, theta_deg);
      double denom = f.norm();
      double rel = denom > 0 ? (a - f).norm() / denom : (a - f).norm();
      if (rel > 1e-3)
        throw NumericalError(
            "rotation derivative: analytic and finite-difference paths disagree "
            "(relative error " + std::to_string(rel) + ", likely a kink crossing at theta=" +
            std::to_string(theta_deg) + ")");
      return SparseOperator(std::move(a));
    }
  }
  throw std::logic_error("build_rotation_derivative: bad mode");
}

// Immutable per-angle operator cache: the fixed projector T and, per angle,
// the composed block A_i = T * R(theta_i).  Shared by forward operators and
// the design loops so blocks are built once per angle grid.
class AngleBank {
 public:
  AngleBank(const Grid& grid, int n_rays, std::vector<double> angles)
      : grid_(grid), n_rays_(n_rays), angles_(std::move(angles)),
        projector_(build_projector(grid, n_rays)) {
    blocks_.reserve(angles_.size());
    for (double a : angles_) {
      SpMat composed = projector_.matrix() * build_rotation(grid_, a).matrix();
      composed.makeCompressed();
      blocks_.emplace_back(std::move(composed));
    }
  }

  const Grid& grid() const { return grid_; }
  int n_rays() const { return n_rays_; }
  int num_angles() const { return static_cast<int>(angles_.size()); }
  const std::vector<double>& angles() const { return angles_; }
  const SparseOperator& projector() const { return projector_; }
  const SparseOperator& block(int i) const { return blocks_.at(static_cast<size_t>(i)); }

 private:
  Grid grid_;
  int n_rays_;
  std::vector<double> angles_;
  SparseOperator projector_;
  std::vector<SparseOperator> blocks_;
};

// Weighted-angle forward operator: rows are the blocks p_i * T * R(theta_i)
// for angles in the support I(p) = { i : p_i > threshold * max(p) }, stacked
// in ascending angle-index order.
class ForwardOperatorA {
 public:
  ForwardOperatorA(std::shared_ptr<const AngleBank> bank, Vector weights,
                   double support_threshold)
      : bank_(std::move(bank)), weights_(std::move(weights)) {
    if (weights_.size() != bank_->num_angles())
      throw std::invalid_argument("ForwardOperatorA: weight count != angle count");
    if (weights_.size() > 0 && weights_.minCoeff() < 0)
      throw std::invalid_argument("ForwardOperatorA: negative weights");
    double cut = weights_.size() > 0 ? support_threshold * weights_.maxCoeff() : 0.0;
    for (int i = 0; i < weights_.size(); ++i)
      if (weights_[i] > cut && weights_[i] > 0) support_.push_back(i);
  }

  Eigen::Index rows() const {
    return static_cast<Eigen::Index>(support_.size()) * bank_->n_rays();
  }
  Eigen::Index cols() const { return bank_->grid().n(); }
  const std::vector<int>& support() const { return support_; }
  const Vector& weights() const { return weights_; }
  const AngleBank& bank() const { return *bank_; }

  Vector apply(const Vector& f) const {
    if (f.size() != cols()) throw std::invalid_argument("ForwardOperatorA::apply: size");
    Vector out(rows());
    int nr = bank_->n_rays();
    for (size_t k = 0; k < support_.size(); ++k) {
      int i = support_[k];
      out.segment(static_cast<Eigen::Index>(k) * nr, nr) = weights_[i] * bank_->block(i).apply(f);
    }
    return out;
  }

  Vector apply_adjoint(const Vector& w) const {
    if (w.size() != rows()) throw std::invalid_argument("ForwardOperatorA::apply_adjoint: size");
    Vector out = Vector::Zero(cols());
    int nr = bank_->n_rays();
    for (size_t k = 0; k < support_.size(); ++k) {
      int i = support_[k];
      out += weights_[i] *
             bank_->block(i).apply_adjoint(w.segment(static_cast<Eigen::Index>(k) * nr, nr));
    }
    return out;
  }

  // Materializes the stacked sparse matrix (row-scaled support blocks).
  SpMat to_sparse() const {
    std::vector<Triplet> trips;
    int nr = bank_->n_rays();
    for (size_t k = 0; k < support_.size(); ++k) {
      int i = support_[k];
      const SpMat& b = bank_->block(i).matrix();
      for (int col = 0; col < b.outerSize(); ++col)
        for (SpMat::InnerIterator it(b, col); it; ++it)
          trips.emplace_back(static_cast<int>(k) * nr + static_cast<int>(it.row()),
                             static_cast<int>(it.col()), weights_[i] * it.value());
    }
    SpMat out(rows(), cols());
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
  }

 private:
  std::shared_ptr<const AngleBank> bank_;
  Vector weights_;
  std::vector<int> support_;
};

// Builds the weighted-angle operator from scratch (angles -> rotation blocks
// built internally).  threshold is relative: angle i is kept when
// p_i > threshold * max(p) and p_i > 0.
inline ForwardOperatorA assemble_forward_A(const Grid& grid, int n_rays,
                                           const std::vector<double>& angles,
                                           const Vector& weights,
                                           double threshold = 1e-8) {
  auto bank = std::make_shared<AngleBank>(grid, n_rays, angles);
  return ForwardOperatorA(bank, weights, threshold);
}

// Free-angle forward operator: unweighted stacked blocks T * R(p_k) at the
// given angles (duplicates allowed); every angle must lie in [0, 180].
class ForwardOperatorB {
 public:
  ForwardOperatorB(const Grid& grid, int n_rays, const std::vector<double>& angles)
      : grid_(grid), n_rays_(n_rays), angles_(angles) {
    for (double a : angles_)
      if (!(a >= 0.0 && a <= 180.0))
        throw std::invalid_argument("ForwardOperatorB: angle outside [0, 180]");
    SparseOperator projector = build_projector(grid, n_rays);
    blocks_.reserve(angles_.size());
    for (double a : angles_) {
      SpMat composed = projector.matrix() * build_rotation(grid_, a).matrix();
      composed.makeCompressed();
      blocks_.emplace_back(std::move(composed));
    }
  }

  Eigen::Index rows() const {
    return static_cast<Eigen::Index>(angles_.size()) * n_rays_;
  }
  Eigen::Index cols() const { return grid_.n(); }
  const Grid& grid() const { return grid_; }
  int n_rays() const { return n_rays_; }
  const std::vector<double>& angles() const { return angles_; }
  const SparseOperator& block(int k) const { return blocks_.at(static_cast<size_t>(k)); }

  Vector apply(const Vector& f) const {
    if (f.size() != cols()) throw std::invalid_argument("ForwardOperatorB::apply: size");
    Vector out(rows());
    for (size_t k = 0; k < blocks_.size(); ++k)
      out.segment(static_cast<Eigen::Index>(k) * n_rays_, n_rays_) = blocks_[k].apply(f);
    return out;
  }

  Vector apply_adjoint(const Vector& w) const {
    if (w.size() != rows()) throw std::invalid_argument("ForwardOperatorB::apply_adjoint: size");
    Vector out = Vector::Zero(cols());
    for (size_t k = 0; k < blocks_.size(); ++k)
      out += blocks_[k].apply_adjoint(w.segment(static_cast<Eigen::Index>(k) * n_rays_, n_rays_));
    return out;
  }

  SpMat to_sparse() const {
    std::vector<const SpMat*> ptrs;
    ptrs.reserve(blocks_.size());
    for (const auto& b : blocks_) ptrs.push_back(&b.matrix());
    return vstack(ptrs, static_cast<int>(cols()));
  }

 private:
  Grid grid_;
  int n_rays_;
  std::vector<double> angles_;
  std::vector<SparseOperator> blocks_;
};

inline ForwardOperatorB assemble_forward_B(const Grid& grid, int n_rays,
                                           const std::vector<double>& angles) {
  return ForwardOperatorB(grid, n_rays, angles);
}

}  // namespace oedtomo
