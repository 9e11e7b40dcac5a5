#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "kedmd/common.hpp"

namespace kedmd {

/// Wendland kernel parameters. The kernel is k(x,y) = theta_{n,s}(|x-y|/scale),
/// compactly supported on |x-y| < scale and strictly positive definite for
/// pairwise-distinct points.
struct KernelSpec {
  int n = 1;          // state dimension
  int s = 1;          // smoothness degree, theta is C^{2s}
  double scale = 1.0; // support radius
};

/// Throws std::invalid_argument for s < 1 or scale <= 0, and for smoothness
/// degrees without an implemented radial profile (s > 3).
void validate(const KernelSpec& spec);

/// Raw radial profile theta_{n,s}(r); no support scaling applied.
/// Zero for r >= 1.
double eval_theta(const KernelSpec& spec, double r);
double eval_theta_d1(const KernelSpec& spec, double r);
double eval_theta_d2(const KernelSpec& spec, double r);

/// theta_{n,s}(0), the diagonal value k(x,x).
double theta0(const KernelSpec& spec);

double eval_kernel(const KernelSpec& spec, const Vector& x, const Vector& y);

/// Canonical feature vector: entry j is phi_{x_j}(x) = k(x_j, x).
/// Centers are rows of `centers`.
Vector features(const KernelSpec& spec, const Matrix& centers, const Vector& x);

/// Lifted and shifted state Psi(x) = Phi(x) - Phi(0). Zero exactly at x = 0.
Vector lifted_state(const KernelSpec& spec, const Matrix& centers, const Vector& x);

/// Gradient and Hessian of x -> phi_center(x).
Vector feature_gradient(const KernelSpec& spec, const Vector& center, const Vector& x);
Matrix feature_hessian(const KernelSpec& spec, const Vector& center, const Vector& x);

/// Symmetric positive definite kernel matrix with a cached factorization.
/// Entry (i,j) is k(x_j, x_i).
class KernelMatrix {
 public:
  KernelMatrix(const KernelSpec& spec, const Matrix& centers);

  const Matrix& entries() const { return entries_; }
  int size() const { return static_cast<int>(entries_.rows()); }

  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }
  Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }

  double min_eigenvalue() const { return lambda_min_; }
  double condition_estimate() const { return lambda_max_ / lambda_min_; }
  /// Spectral norm of K^-1, i.e. 1 / lambda_min.
  double inverse_norm() const { return 1.0 / lambda_min_; }

 private:
  Matrix entries_;
  Eigen::LLT<Matrix> llt_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

KernelMatrix kernel_matrix(const KernelSpec& spec, const Matrix& centers);

/// Grid-maximized spectral-norm bound D_phi on the feature Hessians over a
/// box. `grid_resolution` is points per axis in 1D; tensor grids in higher
/// dimension use round(grid_resolution^(1/n)) points per axis.
double estimate_D_phi(const KernelSpec& spec, const Matrix& centers, const Box& domain,
                      int grid_resolution = 2001);

struct FeatureNorms {
  Vector per_feature; // |phi_{x_j}|_{N_s} = sqrt(k(x_j,x_j))
  double stacked;     // Euclidean norm of the per-feature norms
};

FeatureNorms rkhs_feature_norms(const KernelSpec& spec, const Matrix& centers);

} // namespace kedmd
