#include "kedmd/common.hpp"

#include <cmath>

namespace kedmd {

bool Box::contains(const Vector& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  }
  return true;
}

double Box::max_norm() const {
  double sq = 0.0;
  for (int i = 0; i < lo.size(); ++i) {
    sq += std::max(lo[i] * lo[i], hi[i] * hi[i]);
  }
  return std::sqrt(sq);
}

double Box::max_one_norm() const {
  double sum = 0.0;
  for (int i = 0; i < lo.size(); ++i) {
    sum += std::max(std::abs(lo[i]), std::abs(hi[i]));
  }
  return sum;
}

Box make_box(double lo, double hi) {
  Box box;
  box.lo = Vector::Constant(1, lo);
  box.hi = Vector::Constant(1, hi);
  return box;
}

void validate(const Box& box) {
  if (box.lo.size() == 0 || box.lo.size() != box.hi.size()) {
    throw std::invalid_argument("box: lo/hi dimension mismatch");
  }
  for (int i = 0; i < box.lo.size(); ++i) {
    if (!(box.lo[i] < box.hi[i])) {
      throw std::invalid_argument("box: lo must be strictly below hi");
    }
  }
}

Matrix tensor_grid(const Box& box, int points_per_axis) {
  validate(box);
  if (points_per_axis < 2) {
    throw std::invalid_argument("tensor_grid: need at least 2 points per axis");
  }
  const int n = box.dim();
  Eigen::Index total = 1;
  for (int i = 0; i < n; ++i) total *= points_per_axis;

  Matrix grid(total, n);
  for (Eigen::Index p = 0; p < total; ++p) {
    Eigen::Index rem = p;
    for (int ax = 0; ax < n; ++ax) {
      const Eigen::Index idx = rem % points_per_axis;
      rem /= points_per_axis;
      const double t = static_cast<double>(idx) / (points_per_axis - 1);
      grid(p, ax) = box.lo[ax] + t * (box.hi[ax] - box.lo[ax]);
    }
  }
  return grid;
}

} // namespace kedmd
