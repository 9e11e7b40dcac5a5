#pragma once

#include <optional>
#include <vector>

#include "kedmd/surrogate.hpp"

namespace kedmd {

struct ExcitationRecord {
  int d_j = 0;
  double sigma_min = 0.0;
};

/// C_3 = 1/2 (L_f x_bar + G_bar u_bar)(L_f + L_G u_bar)
///       * max_j sqrt(d_j) / sigma_min(U_j).
double compute_C3(const SystemConstants& constants,
                  const std::vector<ExcitationRecord>& excitation);

/// Everything the residual-bound coefficients are computed from. C1, C2 are
/// domain constants without a constructive formula; they must be supplied
/// (or calibrated, see ValidationReport).
struct BoundInputs {
  SystemConstants system;
  double D_phi = 0.0;
  double phi_norm = 0.0;  // |Phi|_{N_s}
  double Kinv_norm = 0.0; // spectral norm of K_X^-1
  double h_X = 0.0;
  double dt = 0.0;
  int s = 1;
  int d = 0;
  int m = 0;
  std::vector<ExcitationRecord> excitation;
  std::optional<double> C1;
  std::optional<double> C2;
};

/// Coefficients of the residual bound
/// |r(x,u)| <= c_x|x| + c_u|u| + c_xx|x|^2 + c_xu|x||u| + c_uu|u|^2.
struct BoundConstants {
  double c_x = 0.0;
  double c_u = 0.0;
  double c_xx = 0.0;
  double c_xu = 0.0;
  double c_uu = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  BoundInputs inputs;
};

BoundConstants compute_constants(const BoundInputs& inputs);

double eval_bound(const BoundConstants& constants, double x_norm, double u_norm);
double eval_bound(const BoundConstants& constants, const Vector& x, const Vector& u);

/// Over-approximation |r(x,u)| <= c~_x|x| + c~_u|u| valid on X x U.
struct ProportionalBound {
  double c_tilde_x = 0.0;
  double c_tilde_u = 0.0;
};

ProportionalBound proportional(const BoundConstants& constants);

/// Gathers every bound ingredient from a fitted dataset: grid-estimated
/// system constants, D_phi, the kernel-matrix inverse norm, RKHS feature
/// norms, fill distance, and per-center excitation.
BoundInputs assemble_bound_inputs(const ControlAffineSystem& system, const Dataset& dataset,
                                  std::optional<double> C1, std::optional<double> C2,
                                  int constants_grid = 2001);

struct ValidationConfig {
  ControlAffineSystem system;
  KernelSpec kernel;
  SamplingConfig sampling;
  int d = 9;
  int d_j = 2;
  std::uint64_t seed = 1;
  double sigma_threshold = 0.1;
  int state_grid = 41;
  int input_grid = 41;
  std::vector<double> dt_list{0.1, 0.05, 0.025, 0.0125};
  std::vector<int> d_list{5, 9, 17};
  double h_scaling_dt = 0.005;
  int constants_grid = 2001;
  std::optional<double> C1;
  std::optional<double> C2;
};

struct GridRow {
  Vector x;
  Vector u;
  double residual_norm = 0.0;
  std::optional<double> bound;
};

struct ValidationReport {
  double max_residual = 0.0;
  double mean_residual = 0.0;
  double origin_residual = 0.0;
  std::vector<GridRow> grid;

  // dt scaling of the center residual (projection-free by interpolation).
  std::vector<double> dt_values;
  std::vector<double> dt_max_center_residuals;
  double dt_slope = 0.0;

  // fill-distance scaling at a fixed small dt.
  std::vector<int> d_values;
  std::vector<double> h_values;
  std::vector<double> d_max_residuals;

  std::optional<BoundConstants> constants; // present iff C1 and C2 supplied
  std::optional<double> min_margin;        // min of bound - |r| over the grid
  int violation_count = 0;
  std::optional<double> calibrated_C1;     // smallest C1 with margin >= 0
  bool calibration_feasible = true;
  double calibration_C2 = 1.0;
};

/// Collects, fits, and measures residuals on a state x input grid, the dt
/// scaling at centers, the fill-distance scaling, and bound margins.
/// Violations are reported, never thrown.
ValidationReport validate_empirically(const ValidationConfig& config);

/// Residual norms of one fitted model over a state x input grid.
std::vector<GridRow> residual_grid(const BilinearSurrogate& model,
                                   const ControlAffineSystem& system,
                                   const SamplingConfig& sampling, int state_grid,
                                   int input_grid);

/// max over centers and an input grid of |r(x_j, u)|.
double max_center_residual(const BilinearSurrogate& model,
                           const ControlAffineSystem& system,
                           const SamplingConfig& sampling, int input_grid);

/// Writes report.json and residual_grid.csv into `dir`.
void write_report(const ValidationReport& report, const std::filesystem::path& dir);

} // namespace kedmd
