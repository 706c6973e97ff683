#pragma once

// Synthetic training-set generators (rectangles, pentagons, smooth shapes,
// head phantoms) and the noisy data simulator.  All randomness flows through
// per-sample forks of a single seed, so every dataset is reproducible
// byte-for-byte from (kind, count, grid, seed).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "core.hpp"
#include "rng.hpp"
#include "tomo.hpp"

namespace oedtomo {

struct TrainingSet {
  Grid grid;
  std::vector<Image> images;
  std::string kind;
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(images.size()); }
};

struct NoiseSpec {
  double level = 0.0;       // noise scale relative to the RMS of the clean data
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_gen_args(int count, const Grid& grid) {
  if (count < 1) throw std::invalid_argument("dataset generator: count must be >= 1");
  if (grid.width < 8 || grid.height < 8)
    throw std::invalid_argument("dataset generator: grid must be at least 8x8");
}

}  // namespace detail

// Binary axis-aligned rectangles: side lengths >= 2 pixels (area >= 4),
// drawn uniformly subject to full containment in the grid.
inline TrainingSet gen_rectangles(int count, const Grid& grid, std::uint64_t seed) {
  detail::check_gen_args(count, grid);
  TrainingSet ts{grid, {}, "rectangles", seed};
  Rng root(seed);
  for (int s = 0; s < count; ++s) {
    Rng rng = root.fork(static_cast<std::uint64_t>(s));
    int max_w = std::max(2, (grid.width * 3) / 4);
    int max_h = std::max(2, (grid.height * 3) / 4);
    int w = rng.uniform_int(2, max_w);
    int h = rng.uniform_int(2, max_h);
    int x0 = rng.uniform_int(0, grid.width - w);
    int y0 = rng.uniform_int(0, grid.height - h);
    Image img = Image::zero(grid);
    for (int i = y0; i < y0 + h; ++i)
      for (int j = x0; j < x0 + w; ++j) img.at(i, j) = 1.0;
    ts.images.push_back(std::move(img));
  }
  return ts;
}

// Binary regular pentagons in a fixed orientation: vertices at polar angles
// 63 + 72k degrees about the center, which places the five edge normals at
// 27, 63, 99, 135, 171 degrees (mod 180).  A pixel is set when its center
// lies inside the polygon (boundary counts as inside).
inline TrainingSet gen_pentagons(int count, const Grid& grid, std::uint64_t seed) {
  detail::check_gen_args(count, grid);
  TrainingSet ts{grid, {}, "pentagons", seed};
  Rng root(seed);
  const double vertex_base_deg = 63.0;
  for (int s = 0; s < count; ++s) {
    Rng rng = root.fork(static_cast<std::uint64_t>(s));
    double max_r = std::min(grid.width, grid.height) / 2.0 - 1.5;
    double radius = rng.uniform(4.0, std::max(4.0, max_r));
    double cx = rng.uniform(radius, grid.width - 1 - radius);
    double cy = rng.uniform(radius, grid.height - 1 - radius);
    double vx[5], vy[5];
    for (int k = 0; k < 5; ++k) {
      double a = deg2rad(vertex_base_deg + 72.0 * k);
      vx[k] = cx + radius * std::cos(a);
      vy[k] = cy + radius * std::sin(a);
    }
    Image img = Image::zero(grid);
    for (int i = 0; i < grid.height; ++i) {
      for (int j = 0; j < grid.width; ++j) {
        bool inside = true;
        for (int k = 0; k < 5 && inside; ++k) {
          int k2 = (k + 1) % 5;
          double cross = (vx[k2] - vx[k]) * (i - vy[k]) - (vy[k2] - vy[k]) * (j - vx[k]);
          if (cross < 0) inside = false;  // vertices are in counterclockwise order
        }
        if (inside) img.at(i, j) = 1.0;
      }
    }
    ts.images.push_back(std::move(img));
  }
  return ts;
}

// Smooth nonnegative shapes: a random low-frequency cosine field rescaled to
// [0, 1], masked by a star-convex blob (radius r(phi) = r0 (1 + sum of a few
// low harmonics) about a random center), which keeps the support connected.
inline TrainingSet gen_shapes(int count, const Grid& grid, std::uint64_t seed) {
  detail::check_gen_args(count, grid);
  TrainingSet ts{grid, {}, "shapes", seed};
  Rng root(seed);
  for (int s = 0; s < count; ++s) {
    Rng rng = root.fork(static_cast<std::uint64_t>(s));
    // Low-frequency field: 10 cosine modes with wave numbers in {0..3}^2 \ {0}.
    struct Mode { double amp, k1, k2, phase; };
    std::vector<Mode> modes;
    for (int m = 0; m < 10; ++m) {
      int k1 = rng.uniform_int(0, 3);
      int k2 = rng.uniform_int(0, 3);
      if (k1 == 0 && k2 == 0) k1 = 1;
      double amp = rng.uniform(-1.0, 1.0) / (1.0 + k1 + k2);
      double phase = rng.uniform(0.0, 2 * kPi);
      modes.push_back({amp, static_cast<double>(k1), static_cast<double>(k2), phase});
    }
    double blob_r0 = rng.uniform(0.22, 0.36) * std::min(grid.width, grid.height);
    double cx = rng.uniform(0.38, 0.62) * (grid.width - 1);
    double cy = rng.uniform(0.38, 0.62) * (grid.height - 1);
    double eps[3], psi[3];
    for (int h = 0; h < 3; ++h) {
      eps[h] = rng.uniform(0.0, 0.22 / (h + 1));
      psi[h] = rng.uniform(0.0, 2 * kPi);
    }
    Vector field(grid.n());
    for (int i = 0; i < grid.height; ++i)
      for (int j = 0; j < grid.width; ++j) {
        double v = 0;
        for (const auto& m : modes)
          v += m.amp * std::cos(2 * kPi * (m.k1 * j + m.k2 * i) / grid.width + m.phase);
        field[grid.index(i, j)] = v;
      }
    double lo = field.minCoeff(), hi = field.maxCoeff();
    double span = hi > lo ? hi - lo : 1.0;
    Image img = Image::zero(grid);
    for (int i = 0; i < grid.height; ++i)
      for (int j = 0; j < grid.width; ++j) {
        double dx = j - cx, dy = i - cy;
        double r = std::hypot(dx, dy);
        double phi = std::atan2(dy, dx);
        double mod = 1.0;
        for (int h = 0; h < 3; ++h) mod += eps[h] * std::cos((h + 1) * phi + psi[h]);
        double rmax = blob_r0 * mod;
        if (r <= rmax)
          img.at(i, j) = (field[grid.index(i, j)] - lo) / span;
      }
    ts.images.push_back(std::move(img));
  }
  return ts;
}

struct PhantomEllipse {
  double intensity, a, b, x0, y0, phi_deg;
};

// Standard modified Shepp-Logan ellipse table on the unit square [-1, 1]^2.
inline std::vector<PhantomEllipse> modified_shepp_logan_table() {
  return {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
}

// Rasterizes an ellipse list: pixel centers are mapped to [-1, 1]^2,
// intensities of covering ellipses are summed, and the result is clipped to
// [0, 1].
inline Image rasterize_ellipses(const Grid& grid, const std::vector<PhantomEllipse>& ellipses) {
  Image img = Image::zero(grid);
  for (int i = 0; i < grid.height; ++i) {
    double y = (2.0 * i - (grid.height - 1)) / grid.height;
    for (int j = 0; j < grid.width; ++j) {
      double x = (2.0 * j - (grid.width - 1)) / grid.width;
      double v = 0;
      for (const auto& e : ellipses) {
        double ct = std::cos(deg2rad(e.phi_deg)), st = std::sin(deg2rad(e.phi_deg));
        double dx = x - e.x0, dy = y - e.y0;
        double u = ct * dx + st * dy;
        double w = -st * dx + ct * dy;
        if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.intensity;
      }
      img.at(i, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

struct PhantomJitter {
  double axis = 0.10;       // relative axis-length jitter
  double intensity = 0.10;  // relative intensity jitter
  double rotation = 10.0;   // global rotation jitter in degrees
  int max_tumors = 3;
};

// Randomized head phantoms: per-sample perturbations of the modified
// Shepp-Logan table (axis lengths, intensities, global rotation) plus 0-3
// extra small tumor ellipses.  With all jitters zero and max_tumors = 0 the
// output is the exact base phantom raster.
inline TrainingSet gen_phantoms(int count, const Grid& grid, std::uint64_t seed,
                                const PhantomJitter& jitter = PhantomJitter{}) {
  detail::check_gen_args(count, grid);
  TrainingSet ts{grid, {}, "phantom", seed};
  Rng root(seed);
  for (int s = 0; s < count; ++s) {
    Rng rng = root.fork(static_cast<std::uint64_t>(s));
    auto ellipses = modified_shepp_logan_table();
    double rot = jitter.rotation * rng.uniform(-1.0, 1.0);
    double cr = std::cos(deg2rad(rot)), sr = std::sin(deg2rad(rot));
    for (auto& e : ellipses) {
      e.a *= 1.0 + jitter.axis * rng.uniform(-1.0, 1.0);
      e.b *= 1.0 + jitter.axis * rng.uniform(-1.0, 1.0);
      e.intensity *= 1.0 + jitter.intensity * rng.uniform(-1.0, 1.0);
      double x = cr * e.x0 - sr * e.y0;
      double y = sr * e.x0 + cr * e.y0;
      e.x0 = x;
      e.y0 = y;
      e.phi_deg += rot;
    }
    int tumors = jitter.max_tumors > 0 ? rng.uniform_int(0, jitter.max_tumors) : 0;
    for (int t = 0; t < tumors; ++t) {
      PhantomEllipse tumor;
      tumor.a = rng.uniform(0.02, 0.06);
      tumor.b = rng.uniform(0.02, 0.06);
      double rad = 0.35 * std::sqrt(rng.uniform(0.0, 1.0));
      double ang = rng.uniform(0.0, 2 * kPi);
      tumor.x0 = rad * std::cos(ang);
      tumor.y0 = rad * std::sin(ang);
      tumor.phi_deg = rng.uniform(0.0, 180.0);
      tumor.intensity = 0.1 * (1.0 + jitter.intensity * rng.uniform(-1.0, 1.0));
      ellipses.push_back(tumor);
    }
    ts.images.push_back(rasterize_ellipses(grid, ellipses));
  }
  return ts;
}

inline TrainingSet generate_dataset(const std::string& kind, int count, const Grid& grid,
                                    std::uint64_t seed) {
  if (kind == "rectangles") return gen_rectangles(count, grid, seed);
  if (kind == "pentagons") return gen_pentagons(count, grid, seed);
  if (kind == "shapes") return gen_shapes(count, grid, seed);
  if (kind == "phantom") return gen_phantoms(count, grid, seed);
  throw std::invalid_argument("generate_dataset: unknown kind '" + kind + "'");
}

// Adds Gaussian noise to clean data at a scale relative to its RMS:
// d = clean + level * (||clean||_2 / sqrt(m)) * z with z ~ N(0, I) drawn from
// the given seed.  level = 0 returns the clean data exactly.
inline Vector noisy_from_clean(const Vector& clean, double level, std::uint64_t seed) {
  if (clean.size() == 0)
    throw std::invalid_argument("simulate_data: operator has zero rows");
  if (level < 0) throw std::invalid_argument("simulate_data: negative noise level");
  if (level == 0) return clean;
  double scale = level * clean.norm() / std::sqrt(static_cast<double>(clean.size()));
  Rng rng(seed);
  return clean + scale * rng.normal_vector(clean.size());
}

template <typename Op>
inline Vector simulate_data(const Op& forward, const Image& f, const NoiseSpec& noise) {
  return noisy_from_clean(forward.apply(f.values), noise.level, noise.seed);
}

inline Vector simulate_data(const SpMat& forward, const Image& f, const NoiseSpec& noise) {
  if (forward.cols() != f.values.size())
    throw std::invalid_argument("simulate_data: operator/image size mismatch");
  Vector clean = forward * f.values;
  return noisy_from_clean(clean, noise.level, noise.seed);
}

}  // namespace oedtomo
