#include "kedmd/system.hpp"

#include <cmath>
#include <map>

namespace kedmd {

namespace {

Vector vector_field(const ControlAffineSystem& system, const Vector& x, const Vector& u) {
  return system.drift(x) + system.control_columns(x) * u;
}

Matrix fd_drift_jacobian(const ControlAffineSystem& system, const Vector& x, double step) {
  Matrix jac(system.n, system.n);
  for (int k = 0; k < system.n; ++k) {
    Vector xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    jac.col(k) = (system.drift(xp) - system.drift(xm)) / (2.0 * step);
  }
  return jac;
}

std::vector<Matrix> fd_control_jacobians(const ControlAffineSystem& system, const Vector& x,
                                         double step) {
  std::vector<Matrix> jacs(system.m, Matrix(system.n, system.n));
  for (int k = 0; k < system.n; ++k) {
    Vector xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    const Matrix diff = (system.control_columns(xp) - system.control_columns(xm)) / (2.0 * step);
    for (int i = 0; i < system.m; ++i) jacs[i].col(k) = diff.col(i);
  }
  return jacs;
}

double spectral_norm(const Matrix& a) {
  if (a.rows() == 1 && a.cols() == 1) return std::abs(a(0, 0));
  return a.jacobiSvd().singularValues()[0];
}

std::map<std::string, std::function<ControlAffineSystem()>>& registry() {
  static std::map<std::string, std::function<ControlAffineSystem()>> systems = {
      {"zone_temp", zone_temp_benchmark},
  };
  return systems;
}

} // namespace

void validate(const ControlAffineSystem& system) {
  if (system.n < 1 || system.m < 1) {
    throw std::invalid_argument("system: dimensions must be positive");
  }
  if (!system.drift || !system.control_columns) {
    throw std::invalid_argument("system: drift and control dynamics required");
  }
  validate(system.state_box);
  validate(system.input_box);
  const Vector origin_x = Vector::Zero(system.n);
  const Vector origin_u = Vector::Zero(system.m);
  if (!system.state_box.contains(origin_x) || !system.input_box.contains(origin_u)) {
    throw std::invalid_argument("system: boxes must contain the origin in their interiors");
  }
  if (system.drift(origin_x).norm() > 1e-12) {
    throw std::invalid_argument("system: drift must vanish at the origin, f_c(0) = 0");
  }
}

void validate(const SamplingConfig& sampling) {
  if (!(sampling.dt > 0.0)) throw std::invalid_argument("sampling: dt must be positive");
  if (sampling.substeps < 1) throw std::invalid_argument("sampling: substeps must be >= 1");
}

Vector flow(const ControlAffineSystem& system, const SamplingConfig& sampling,
            const Vector& x0, const Vector& u) {
  const double h = sampling.dt / sampling.substeps;
  Vector x = x0;
  for (int step = 0; step < sampling.substeps; ++step) {
    const Vector k1 = vector_field(system, x, u);
    const Vector k2 = vector_field(system, x + 0.5 * h * k1, u);
    const Vector k3 = vector_field(system, x + 0.5 * h * k2, u);
    const Vector k4 = vector_field(system, x + h * k3, u);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) {
      throw std::runtime_error("flow: trajectory diverged at substep " + std::to_string(step));
    }
  }
  return x;
}

EulerMaps euler_maps(const ControlAffineSystem& system, const SamplingConfig& sampling,
                     const Vector& x) {
  EulerMaps maps;
  const Vector fc = system.drift(x);
  const Matrix gc = system.control_columns(x);
  maps.f = x + sampling.dt * fc;
  maps.g_tilde.resize(system.n, system.m);
  maps.G.resize(system.n, system.m);
  for (int i = 0; i < system.m; ++i) {
    maps.g_tilde.col(i) = x + sampling.dt * (fc + gc.col(i));
    maps.G.col(i) = maps.g_tilde.col(i) - maps.f;
  }
  return maps;
}

SystemConstants estimate_constants(const ControlAffineSystem& system, int grid_resolution) {
  validate(system);
  if (grid_resolution < 2) {
    throw std::invalid_argument("estimate_constants: grid resolution must be >= 2");
  }

  SystemConstants c;
  c.grid_resolution = grid_resolution;
  c.x_bar = system.state_box.max_norm();
  c.u_bar = system.input_box.max_norm();
  c.u_one_max = system.input_box.max_one_norm();

  // 1 - sum(u_i) is affine in u, so its extrema sit at the sum's range ends.
  const double sum_lo = system.input_box.lo.sum();
  const double sum_hi = system.input_box.hi.sum();
  c.u_tilde = std::max(std::abs(1.0 - sum_lo), std::abs(1.0 - sum_hi));

  int per_axis = grid_resolution;
  if (system.n > 1) {
    per_axis = std::max(2, static_cast<int>(std::round(std::pow(
                               static_cast<double>(grid_resolution), 1.0 / system.n))));
  }
  const Matrix grid = tensor_grid(system.state_box, per_axis);
  const double fd_step = 1e-6;

  for (Eigen::Index p = 0; p < grid.rows(); ++p) {
    const Vector x = grid.row(p).transpose();
    c.G_bar = std::max(c.G_bar, spectral_norm(system.control_columns(x)));

    const Matrix jf = system.drift_jacobian ? system.drift_jacobian(x)
                                            : fd_drift_jacobian(system, x, fd_step);
    c.L_f = std::max(c.L_f, spectral_norm(jf));

    const std::vector<Matrix> jg = system.control_jacobians
                                       ? system.control_jacobians(x)
                                       : fd_control_jacobians(system, x, fd_step);
    // |DG_c(x)[v]| <= sqrt(sum_k |dG/dx_k|^2) |v|; exact for n = 1.
    double sq = 0.0;
    for (int k = 0; k < system.n; ++k) {
      Matrix dg_dxk(system.n, system.m);
      for (int i = 0; i < system.m; ++i) dg_dxk.col(i) = jg[i].col(k);
      const double nk = spectral_norm(dg_dxk);
      sq += nk * nk;
    }
    c.L_G = std::max(c.L_G, std::sqrt(sq));
  }
  return c;
}

ControlAffineSystem zone_temp_benchmark() {
  const double v_z = 2.0;
  const double t_0 = -2.0;

  ControlAffineSystem system;
  system.n = 1;
  system.m = 1;
  system.name = "zone_temp";
  system.state_box = make_box(-1.0, 1.0);
  system.input_box = make_box(-2.0, 2.0);
  system.drift = [](const Vector& x) { return Vector::Zero(x.size()); };
  system.control_columns = [=](const Vector& x) {
    Matrix g(1, 1);
    g(0, 0) = (t_0 * std::cos(x[0] / 5.0) - x[0] * x[0] * x[0]) / v_z;
    return g;
  };
  system.drift_jacobian = [](const Vector&) { return Matrix::Zero(1, 1); };
  system.control_jacobians = [=](const Vector& x) {
    Matrix dg(1, 1);
    dg(0, 0) = (-t_0 / 5.0 * std::sin(x[0] / 5.0) - 3.0 * x[0] * x[0]) / v_z;
    return std::vector<Matrix>{dg};
  };
  return system;
}

ControlAffineSystem make_system(const std::string& name) {
  const auto it = registry().find(name);
  if (it == registry().end()) {
    throw std::invalid_argument("unknown system '" + name + "'");
  }
  return it->second();
}

void register_system(const std::string& name, std::function<ControlAffineSystem()> factory) {
  registry()[name] = std::move(factory);
}

} // namespace kedmd
