#pragma once

// Core types shared by every module: grids, images, sparse linear operators,
// error categories, and a handful of numeric helpers.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oedtomo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Thrown when a numerical routine fails to produce a usable result
// (non-convergence, singular systems, divergence).  The CLI maps this
// category to exit code 3; precondition violations use
// std::invalid_argument and map to exit code 2.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * (kPi / 180.0); }

// sin/cos of an angle in degrees, exact at multiples of 90 so that
// rotations by 0/90/180/270 degrees become exact permutations.
inline void sincos_deg(double deg, double& s, double& c) {
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  if (r == 0.0) {
    s = 0.0; c = 1.0;
  } else if (r == 90.0) {
    s = 1.0; c = 0.0;
  } else if (r == 180.0) {
    s = 0.0; c = -1.0;
  } else if (r == 270.0) {
    s = -1.0; c = 0.0;
  } else {
    s = std::sin(deg2rad(deg));
    c = std::cos(deg2rad(deg));
  }
}

// Square pixel grid.  Pixels are unit squares; pixel (row i, col j) has its
// center at coordinates (x=j, y=i) and the image is stored row-major, so the
// flat index of (i, j) is i*width + j.
struct Grid {
  int height = 0;
  int width = 0;

  Grid() = default;
  Grid(int h, int w) : height(h), width(w) {
    if (h < 2 || w < 2) throw std::invalid_argument("Grid: sides must be >= 2");
  }
  int n() const { return height * width; }
  int index(int row, int col) const { return row * width + col; }
  double center_x() const { return (width - 1) / 2.0; }
  double center_y() const { return (height - 1) / 2.0; }
  bool operator==(const Grid& o) const { return height == o.height && width == o.width; }
};

// Image on a grid, values stored row-major in a flat vector.
struct Image {
  Grid grid;
  Vector values;

  Image() = default;
  Image(const Grid& g, Vector v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.n())
      throw std::invalid_argument("Image: value count does not match grid");
  }
  static Image zero(const Grid& g) { return Image(g, Vector::Zero(g.n())); }
  double& at(int row, int col) { return values[grid.index(row, col)]; }
  double at(int row, int col) const { return values[grid.index(row, col)]; }
};

// Sparse linear operator with explicit apply/adjoint entry points.
class SparseOperator {
 public:
  SparseOperator() = default;
  explicit SparseOperator(SpMat m) : mat_(std::move(m)) { mat_.makeCompressed(); }
  SparseOperator(int rows, int cols, const std::vector<Triplet>& triplets)
      : mat_(rows, cols) {
    mat_.setFromTriplets(triplets.begin(), triplets.end());
    mat_.makeCompressed();
  }

  Eigen::Index rows() const { return mat_.rows(); }
  Eigen::Index cols() const { return mat_.cols(); }

  Vector apply(const Vector& x) const {
    if (x.size() != mat_.cols())
      throw std::invalid_argument("SparseOperator::apply: size mismatch");
    return mat_ * x;
  }
  Vector apply_adjoint(const Vector& w) const {
    if (w.size() != mat_.rows())
      throw std::invalid_argument("SparseOperator::apply_adjoint: size mismatch");
    return mat_.transpose() * w;
  }

  const SpMat& matrix() const { return mat_; }
  Eigen::Index nonzeros() const { return mat_.nonZeros(); }

 private:
  SpMat mat_;
};

// Stacks sparse matrices vertically.
inline SpMat vstack(const std::vector<const SpMat*>& blocks, int cols) {
  Eigen::Index total_rows = 0, total_nnz = 0;
  for (const SpMat* b : blocks) {
    if (b->cols() != cols) throw std::invalid_argument("vstack: column mismatch");
    total_rows += b->rows();
    total_nnz += b->nonZeros();
  }
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(total_nnz));
  Eigen::Index row0 = 0;
  for (const SpMat* b : blocks) {
    for (int k = 0; k < b->outerSize(); ++k)
      for (SpMat::InnerIterator it(*b, k); it; ++it)
        trips.emplace_back(static_cast<int>(row0 + it.row()), static_cast<int>(it.col()),
                           it.value());
    row0 += b->rows();
  }
  SpMat out(total_rows, cols);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

inline SpMat sparse_identity(int n, double scale = 1.0) {
  SpMat id(n, n);
  id.setIdentity();
  if (scale != 1.0) id *= scale;
  return id;
}

}  // namespace oedtomo
