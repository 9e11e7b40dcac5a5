#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace kedmd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Axis-aligned box, used for state and input domains.
struct Box {
  Vector lo;
  Vector hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vector& x, double tol = 0.0) const;
  /// Maximum Euclidean norm over the box, attained at a vertex.
  double max_norm() const;
  /// Maximum 1-norm over the box.
  double max_one_norm() const;
};

Box make_box(double lo, double hi);
void validate(const Box& box);

/// Uniform per-axis grid over a box; `points_per_axis` >= 2 includes both faces.
Matrix tensor_grid(const Box& box, int points_per_axis);

} // namespace kedmd
