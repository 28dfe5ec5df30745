#pragma once

#include <cstdint>

#include "pilno/common.hpp"

namespace pilno::geometry {

// Axis-aligned box domain.
struct Domain {
  Vec lower;
  Vec upper;

  Domain(Vec lo, Vec up);
  static Domain unit_box(int d);
  static Domain centered_box(int d, double half_width = 0.5);

  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const;
  bool contains(const Eigen::Ref<const Vec>& x) const;
};

enum class PointRole { sensor, target, boundary };

struct PointCloud {
  Mat coords;  // N x d
  PointRole role = PointRole::sensor;

  int64_t size() const { return coords.rows(); }
  int dim() const { return static_cast<int>(coords.cols()); }
};

// Maximum dimension with embedded direction numbers.
int sobol_max_dim();

// First `n` points of the Sobol sequence starting at index `skip`,
// affinely mapped into `domain`. Index 0 is the origin of [0,1)^d.
// Bit-reproducible for a fixed skip.
PointCloud sobol_points(int64_t n, const Domain& domain, std::uint64_t skip = 0,
                        PointRole role = PointRole::sensor);

// Raw sequence on [0,1)^d, exposed for cross-checking.
Mat sobol_unit(int64_t n, int d, std::uint64_t skip = 0);

// n points uniform on the boundary of a 2-D box: one uniform scalar per
// point mapped to the perimeter arc length, so edges are hit in
// proportion to their length. Output coordinates lie exactly on an edge.
PointCloud boundary_points(int64_t n, const Domain& domain, Rng& rng);

}  // namespace pilno::geometry
