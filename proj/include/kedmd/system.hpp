#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kedmd/common.hpp"

namespace kedmd {

/// Continuous-time control-affine plant dx/dt = f_c(x) + G_c(x) u with
/// f_c(0) = 0 and compact state/input boxes containing the origin.
struct ControlAffineSystem {
  int n = 0;
  int m = 0;
  std::function<Vector(const Vector&)> drift;            // f_c
  std::function<Matrix(const Vector&)> control_columns;  // G_c, n x m
  // Optional analytic Jacobians; finite differences are used when absent.
  std::function<Matrix(const Vector&)> drift_jacobian;
  std::function<std::vector<Matrix>(const Vector&)> control_jacobians; // d g_ci / dx
  Box state_box;
  Box input_box;
  std::string name;
};

void validate(const ControlAffineSystem& system);

struct SamplingConfig {
  double dt = 0.01; // sampling period
  int substeps = 100;
};

void validate(const SamplingConfig& sampling);

/// Sampled-data successor x(dt; x0, u) for input held constant over the
/// interval, integrated with fixed-step RK4. Throws if the state leaves the
/// finite range ("trajectory diverged").
Vector flow(const ControlAffineSystem& system, const SamplingConfig& sampling,
            const Vector& x0, const Vector& u);

/// Forward Euler discretizations: f(x) = x + dt f_c(x),
/// g_i(x) = x + dt (f_c(x) + g_ci(x)), and G(x) = dt G_c(x) columnwise.
struct EulerMaps {
  Vector f;
  Matrix g_tilde; // n x m, column i = g_i(x)
  Matrix G;       // n x m, column i = g_i(x) - f(x)
};

EulerMaps euler_maps(const ControlAffineSystem& system, const SamplingConfig& sampling,
                     const Vector& x);

/// Lipschitz/extremum constants appearing in the residual bound.
struct SystemConstants {
  double L_f = 0.0;      // Lipschitz constant of f_c on X
  double L_G = 0.0;      // Lipschitz constant of G_c on X
  double G_bar = 0.0;    // sup of |G_c(x)| on X
  double x_bar = 0.0;    // max |x| over X
  double u_bar = 0.0;    // max |u| over U
  double u_tilde = 0.0;  // max |1 - sum_i u_i| over U
  double u_one_max = 0.0;// max |u|_1 over U
  int grid_resolution = 0;
};

/// Estimates L_f, L_G, G_bar by grid maximization of Jacobian/operator norms;
/// x_bar, u_bar, u_tilde, u_one_max are exact box-vertex values.
SystemConstants estimate_constants(const ControlAffineSystem& system,
                                   int grid_resolution = 2001);

/// Zone temperature benchmark: n = m = 1, f_c = 0,
/// g_c1(x) = (T0 cos(x/5) - x^3)/Vz with Vz = 2, T0 = -2,
/// X = [-1, 1], U = [-2, 2].
ControlAffineSystem zone_temp_benchmark();

/// Named-system lookup used by the CLI; throws for unknown names.
ControlAffineSystem make_system(const std::string& name);
/// Registers a custom factory under `name`, replacing any previous entry.
void register_system(const std::string& name,
                     std::function<ControlAffineSystem()> factory);

} // namespace kedmd
