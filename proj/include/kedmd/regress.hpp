#pragma once

#include <vector>

#include "kedmd/dataset.hpp"

namespace kedmd {

/// Per-center least-squares estimate of the Euler maps,
/// H_j = [f(x_j) G(x_j)].
struct LocalEstimate {
  int center_index = 0;
  Vector center;
  Vector f_hat;
  Matrix G_hat;         // n x m
  double residual_norm = 0.0;
};

/// Fits [x+_1 ... x+_dj] ~ H [1 ... 1; u_1 ... u_dj] in the Frobenius norm.
/// With `is_origin` the equilibrium is encoded exactly: f_hat = 0 and only G
/// is regressed. Throws when the excitation condition fails (rank-deficient
/// input matrix).
LocalEstimate fit_local(const TripletSet& triplets, bool is_origin);

/// Fits every center; index 0 is the origin-constrained regression.
std::vector<LocalEstimate> fit_all(const std::vector<TripletSet>& triplets);

struct PerturbationGap {
  double gap = 0.0;   // spectral norm of H_hat - [f(x_j) G(x_j)]
  double bound = 0.0; // dt^2 C_3
};

/// Compares the estimate against the true Euler maps (oracle context); `c3`
/// comes from bounds::compute_C3.
PerturbationGap perturbation_gap(const LocalEstimate& estimate,
                                 const ControlAffineSystem& system,
                                 const SamplingConfig& sampling, double c3);

} // namespace kedmd
