#pragma once

// Axis-aligned boxes and regular sample grids in two or three dimensions.

#include <Eigen/Dense>

#include <array>
#include <cstdint>

#include "wavetopo/errors.hpp"

namespace wavetopo {

struct Box {
  Eigen::VectorXd lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  static Box cube(int n, double lo, double hi) {
    return {Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi)};
  }
};

// Samples origin + spacing * (i, j, k); x varies fastest. Unused axes have
// size 1.
struct GridSpec {
  int dim = 3;
  Eigen::VectorXd origin;
  double spacing = 0.0;
  std::array<int, 3> size{1, 1, 1};

  std::int64_t count() const { return std::int64_t(size[0]) * size[1] * size[2]; }
  std::int64_t index(int i, int j, int k = 0) const {
    return i + std::int64_t(size[0]) * (j + std::int64_t(size[1]) * k);
  }
  std::array<int, 3> coords(std::int64_t idx) const {
    const int i = static_cast<int>(idx % size[0]);
    idx /= size[0];
    const int j = static_cast<int>(idx % size[1]);
    return {i, j, static_cast<int>(idx / size[1])};
  }
  Eigen::VectorXd point(int i, int j, int k = 0) const {
    Eigen::VectorXd p = origin;
    const int ijk[3] = {i, j, k};
    for (int d = 0; d < dim; ++d) p[d] += spacing * ijk[d];
    return p;
  }
  Eigen::VectorXd point(std::int64_t idx) const {
    const auto c = coords(idx);
    return point(c[0], c[1], c[2]);
  }
  bool on_boundary(std::int64_t idx) const {
    const auto c = coords(idx);
    for (int d = 0; d < dim; ++d)
      if (c[d] == 0 || c[d] == size[d] - 1) return true;
    return false;
  }
};

// Cell-centre samples of the box: lo + (i + 1/2) h.
inline GridSpec cell_center_grid(const Box& box, double h) {
  if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
  const int n = box.dim();
  if (n < 2 || n > 3) throw DomainError("sample grids support n = 2, 3");
  GridSpec g;
  g.dim = n;
  g.spacing = h;
  g.origin = box.lo.array() + 0.5 * h;
  for (int d = 0; d < n; ++d) {
    const double cells = (box.hi[d] - box.lo[d]) / h;
    g.size[d] = std::max(1, static_cast<int>(std::floor(cells + 1e-9)));
  }
  return g;
}

}  // namespace wavetopo
