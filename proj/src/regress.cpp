#include "kedmd/regress.hpp"

#include <Eigen/QR>

namespace kedmd {

namespace {

constexpr double kRankTolerance = 1e-10;

} // namespace

LocalEstimate fit_local(const TripletSet& triplets, bool is_origin) {
  const int d_j = triplets.count();
  const int m = static_cast<int>(triplets.inputs.cols());
  const int n = static_cast<int>(triplets.successors.cols());
  if (d_j < m + 1) {
    throw std::invalid_argument("fit_local: need at least m + 1 triplets");
  }

  LocalEstimate estimate;
  estimate.center_index = triplets.center_index;
  estimate.center = triplets.center;

  const Matrix targets = triplets.successors; // d_j x n

  if (is_origin) {
    // f(0) = 0 is known; regress only the input channel gains.
    if (input_sigma_min(triplets.inputs) < kRankTolerance) {
      throw std::runtime_error("fit_local: rank-deficient input matrix at the origin");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(triplets.inputs); // d_j x m
    if (qr.rank() < m) {
      throw std::runtime_error("fit_local: rank-deficient input matrix at the origin");
    }
    estimate.f_hat = Vector::Zero(n);
    estimate.G_hat = qr.solve(targets).transpose(); // n x m
  } else {
    Matrix regressors(d_j, m + 1); // rows [1 u^T]
    regressors.col(0).setOnes();
    regressors.rightCols(m) = triplets.inputs;
    if (input_sigma_min(triplets.inputs) < kRankTolerance) {
      throw std::runtime_error("fit_local: excitation condition violated at center " +
                               std::to_string(triplets.center_index));
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(regressors);
    const Matrix h = qr.solve(targets).transpose(); // n x (m+1)
    estimate.f_hat = h.col(0);
    estimate.G_hat = h.rightCols(m);
  }

  Matrix fitted(d_j, n);
  for (int l = 0; l < d_j; ++l) {
    fitted.row(l) =
        (estimate.f_hat + estimate.G_hat * triplets.inputs.row(l).transpose()).transpose();
  }
  estimate.residual_norm = (targets - fitted).norm();
  return estimate;
}

std::vector<LocalEstimate> fit_all(const std::vector<TripletSet>& triplets) {
  std::vector<LocalEstimate> estimates;
  estimates.reserve(triplets.size());
  for (std::size_t j = 0; j < triplets.size(); ++j) {
    estimates.push_back(fit_local(triplets[j], j == 0));
  }
  return estimates;
}

PerturbationGap perturbation_gap(const LocalEstimate& estimate,
                                 const ControlAffineSystem& system,
                                 const SamplingConfig& sampling, double c3) {
  const EulerMaps maps = euler_maps(system, sampling, estimate.center);
  Matrix diff(system.n, system.m + 1);
  diff.col(0) = estimate.f_hat - maps.f;
  diff.rightCols(system.m) = estimate.G_hat - maps.G;

  PerturbationGap gap;
  gap.gap = diff.jacobiSvd().singularValues()[0];
  gap.bound = sampling.dt * sampling.dt * c3;
  return gap;
}

} // namespace kedmd
