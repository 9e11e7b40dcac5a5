#include "kedmd/kernel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>

namespace kedmd {

namespace {

// Factored Wendland profile theta(r) = (1-r)^k * q(r) on [0,1).
// The polynomial degree is tied to l = floor(n_eff/2) + s + 1; dimensions
// below three share the n = 3 profile, which is the one printed in the
// standard tables (e.g. (1-r)^4 (4r+1) for s = 1).
struct WendlandProfile {
  int k = 0;                      // exponent of (1-r)
  std::array<double, 4> q{};      // q coefficients, ascending powers
  int q_deg = 0;
};

WendlandProfile wendland_profile(const KernelSpec& spec) {
  const int n_eff = std::max(spec.n, 3);
  const double l = std::floor(n_eff / 2.0) + spec.s + 1;

  WendlandProfile p;
  switch (spec.s) {
    case 1:
      p.k = static_cast<int>(l) + 1;
      p.q = {1.0, l + 1.0, 0.0, 0.0};
      p.q_deg = 1;
      break;
    case 2:
      p.k = static_cast<int>(l) + 2;
      p.q = {3.0, 3.0 * l + 6.0, l * l + 4.0 * l + 3.0, 0.0};
      p.q_deg = 2;
      break;
    case 3:
      p.k = static_cast<int>(l) + 3;
      p.q = {15.0, 15.0 * l + 45.0, 6.0 * l * l + 36.0 * l + 45.0,
             l * l * l + 9.0 * l * l + 23.0 * l + 15.0};
      p.q_deg = 3;
      break;
    default:
      throw std::invalid_argument("unimplemented smoothness degree s = " +
                                  std::to_string(spec.s));
  }
  return p;
}

double poly_eval(const std::array<double, 4>& c, int deg, double r) {
  double v = c[deg];
  for (int i = deg - 1; i >= 0; --i) v = v * r + c[i];
  return v;
}

double poly_d1(const std::array<double, 4>& c, int deg, double r) {
  double v = 0.0;
  for (int i = deg; i >= 1; --i) v = v * r + i * c[i];
  return v;
}

double poly_d2(const std::array<double, 4>& c, int deg, double r) {
  double v = 0.0;
  for (int i = deg; i >= 2; --i) v = v * r + i * (i - 1) * c[i];
  return v;
}

double dist(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("kernel: state dimension mismatch");
  }
  return (x - y).norm();
}

} // namespace

void validate(const KernelSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("kernel: state dimension must be positive");
  if (spec.s < 1) throw std::invalid_argument("kernel: smoothness degree must satisfy s >= 1");
  if (!(spec.scale > 0.0)) throw std::invalid_argument("kernel: support scale must be positive");
  wendland_profile(spec); // rejects unimplemented s
}

double eval_theta(const KernelSpec& spec, double r) {
  if (r < 0.0) throw std::invalid_argument("eval_theta: negative radius");
  if (r >= 1.0) return 0.0;
  const WendlandProfile p = wendland_profile(spec);
  return std::pow(1.0 - r, p.k) * poly_eval(p.q, p.q_deg, r);
}

double eval_theta_d1(const KernelSpec& spec, double r) {
  if (r < 0.0) throw std::invalid_argument("eval_theta_d1: negative radius");
  if (r >= 1.0) return 0.0;
  const WendlandProfile p = wendland_profile(spec);
  const double u = 1.0 - r;
  return std::pow(u, p.k - 1) *
         (u * poly_d1(p.q, p.q_deg, r) - p.k * poly_eval(p.q, p.q_deg, r));
}

double eval_theta_d2(const KernelSpec& spec, double r) {
  if (r < 0.0) throw std::invalid_argument("eval_theta_d2: negative radius");
  if (r >= 1.0) return 0.0;
  const WendlandProfile p = wendland_profile(spec);
  const double u = 1.0 - r;
  return std::pow(u, p.k - 2) *
         (u * u * poly_d2(p.q, p.q_deg, r) - 2.0 * p.k * u * poly_d1(p.q, p.q_deg, r) +
          p.k * (p.k - 1) * poly_eval(p.q, p.q_deg, r));
}

double theta0(const KernelSpec& spec) {
  return wendland_profile(spec).q[0];
}

double eval_kernel(const KernelSpec& spec, const Vector& x, const Vector& y) {
  return eval_theta(spec, dist(x, y) / spec.scale);
}

Vector features(const KernelSpec& spec, const Matrix& centers, const Vector& x) {
  if (centers.cols() != x.size()) {
    throw std::invalid_argument("features: center/state dimension mismatch");
  }
  const Eigen::Index d = centers.rows();
  Vector phi(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    phi[j] = eval_theta(spec, (centers.row(j).transpose() - x).norm() / spec.scale);
  }
  return phi;
}

Vector lifted_state(const KernelSpec& spec, const Matrix& centers, const Vector& x) {
  const Vector origin = Vector::Zero(x.size());
  return features(spec, centers, x) - features(spec, centers, origin);
}

Vector feature_gradient(const KernelSpec& spec, const Vector& center, const Vector& x) {
  const double r = dist(x, center);
  const double rho = r / spec.scale;
  if (rho >= 1.0 || r < 1e-14) return Vector::Zero(x.size());
  return (eval_theta_d1(spec, rho) / (spec.scale * r)) * (x - center);
}

Matrix feature_hessian(const KernelSpec& spec, const Vector& center, const Vector& x) {
  const int n = static_cast<int>(x.size());
  const double r = dist(x, center);
  const double rho = r / spec.scale;
  const double inv_scale_sq = 1.0 / (spec.scale * spec.scale);
  if (rho >= 1.0) return Matrix::Zero(n, n);
  if (r < 1e-14) return eval_theta_d2(spec, 0.0) * inv_scale_sq * Matrix::Identity(n, n);

  const Vector v = (x - center) / r;
  const double radial = eval_theta_d2(spec, rho) * inv_scale_sq;
  const double tangential = eval_theta_d1(spec, rho) / (spec.scale * r);
  return radial * (v * v.transpose()) +
         tangential * (Matrix::Identity(n, n) - v * v.transpose());
}

KernelMatrix::KernelMatrix(const KernelSpec& spec, const Matrix& centers) {
  validate(spec);
  const Eigen::Index d = centers.rows();
  if (d < 1) throw std::invalid_argument("kernel_matrix: empty center set");

  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      if ((centers.row(i) - centers.row(j)).norm() < 1e-12) {
        throw std::invalid_argument("kernel_matrix: duplicate centers at indices " +
                                    std::to_string(i) + ", " + std::to_string(j));
      }
    }
  }

  entries_.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    entries_(i, i) = theta0(spec);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double v =
          eval_theta(spec, (centers.row(i) - centers.row(j)).norm() / spec.scale);
      entries_(i, j) = v;
      entries_(j, i) = v;
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_, Eigen::EigenvaluesOnly);
  lambda_min_ = eig.eigenvalues().minCoeff();
  lambda_max_ = eig.eigenvalues().maxCoeff();

  llt_.compute(entries_);
  if (llt_.info() != Eigen::Success || lambda_min_ <= 0.0) {
    throw std::runtime_error("kernel_matrix: numerically indefinite");
  }
}

KernelMatrix kernel_matrix(const KernelSpec& spec, const Matrix& centers) {
  return KernelMatrix(spec, centers);
}

double estimate_D_phi(const KernelSpec& spec, const Matrix& centers, const Box& domain,
                      int grid_resolution) {
  validate(spec);
  const int n = domain.dim();
  int per_axis = grid_resolution;
  if (n > 1) {
    per_axis = std::max(2, static_cast<int>(std::round(
                               std::pow(static_cast<double>(grid_resolution), 1.0 / n))));
  }
  const Matrix grid = tensor_grid(domain, per_axis);

  double d_phi = 0.0;
  for (Eigen::Index p = 0; p < grid.rows(); ++p) {
    const Vector x = grid.row(p).transpose();
    for (Eigen::Index j = 0; j < centers.rows(); ++j) {
      const Matrix hess = feature_hessian(spec, centers.row(j).transpose(), x);
      const double norm =
          Eigen::SelfAdjointEigenSolver<Matrix>(hess, Eigen::EigenvaluesOnly)
              .eigenvalues()
              .cwiseAbs()
              .maxCoeff();
      d_phi = std::max(d_phi, norm);
    }
  }
  return d_phi;
}

FeatureNorms rkhs_feature_norms(const KernelSpec& spec, const Matrix& centers) {
  // Reproducing property: |phi_x|^2 = <phi_x, phi_x> = k(x,x) = theta(0).
  const Eigen::Index d = centers.rows();
  FeatureNorms norms;
  norms.per_feature = Vector::Constant(d, std::sqrt(theta0(spec)));
  norms.stacked = norms.per_feature.norm();
  return norms;
}

} // namespace kedmd
