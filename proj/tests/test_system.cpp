#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kedmd/system.hpp"

using namespace kedmd;

namespace {

Vector vec1(double x) { return Vector::Constant(1, x); }

ControlAffineSystem quadratic_drift_system() {
  // dx/dt = x^2; diverges in finite time from x(0) = 1.
  ControlAffineSystem system;
  system.n = 1;
  system.m = 1;
  system.name = "quadratic";
  system.state_box = make_box(-2.0, 2.0);
  system.input_box = make_box(-1.0, 1.0);
  system.drift = [](const Vector& x) { return Vector::Constant(1, x[0] * x[0]); };
  system.control_columns = [](const Vector&) { return Matrix::Zero(1, 1); };
  return system;
}

} // namespace

TEST_CASE("zone temperature benchmark definition") {
  const ControlAffineSystem system = zone_temp_benchmark();
  validate(system);
  CHECK(system.n == 1);
  CHECK(system.m == 1);
  CHECK(system.state_box.lo[0] == -1.0);
  CHECK(system.state_box.hi[0] == 1.0);
  CHECK(system.input_box.lo[0] == -2.0);
  CHECK(system.input_box.hi[0] == 2.0);

  // g_c1(0) = T0 / Vz = -1; drift vanishes everywhere.
  CHECK(system.control_columns(vec1(0.0))(0, 0) == -1.0);
  for (double x = -1.0; x <= 1.0; x += 0.125) {
    CHECK(system.drift(vec1(x))[0] == 0.0);
  }

  // g_c1(x) = (T0 cos(x/5) - x^3) / Vz, checked against direct arithmetic.
  const double x = 0.7;
  const double expected = (-2.0 * std::cos(0.7 / 5.0) - 0.7 * 0.7 * 0.7) / 2.0;
  CHECK(system.control_columns(vec1(x))(0, 0) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("flow basics") {
  const ControlAffineSystem system = zone_temp_benchmark();
  const SamplingConfig sampling{0.01, 100};

  CHECK(flow(system, sampling, vec1(0.0), vec1(0.0))[0] == 0.0);

  // The origin is not input-invariant: g_c1(0) != 0.
  CHECK(flow(system, sampling, vec1(0.0), vec1(1.0))[0] != 0.0);
}

TEST_CASE("flow composition consistency") {
  const ControlAffineSystem system = zone_temp_benchmark();
  const Vector x0 = vec1(0.4);
  const Vector u = vec1(1.5);

  const Vector whole = flow(system, SamplingConfig{0.02, 8}, x0, u);
  const Vector split = flow(system, SamplingConfig{0.01, 4},
                            flow(system, SamplingConfig{0.01, 4}, x0, u), u);
  CHECK((whole - split).norm() < 1e-9);

  // Halving the step by doubling the substeps moves the endpoint far less
  // than the stated tolerance.
  const Vector coarse = flow(system, SamplingConfig{0.01, 100}, x0, u);
  const Vector fine = flow(system, SamplingConfig{0.01, 200}, x0, u);
  CHECK((coarse - fine).norm() < 1e-9);
}

TEST_CASE("flow matches refined reference") {
  const ControlAffineSystem system = zone_temp_benchmark();
  const SamplingConfig sampling{0.01, 100};
  const SamplingConfig reference{0.01, 1000};
  const Vector endpoint = flow(system, sampling, vec1(0.0), vec1(1.0));
  const Vector truth = flow(system, reference, vec1(0.0), vec1(1.0));
  CHECK((endpoint - truth).norm() < 1e-8);
}

TEST_CASE("rk4 order") {
  const ControlAffineSystem system = zone_temp_benchmark();
  const Vector x0 = vec1(0.8);
  const Vector u = vec1(2.0);
  // Enough substeps per run to measure the global h^4 order rather than the
  // single-step h^5 truncation.
  const double dt = 2.0;

  std::vector<double> steps, errors;
  for (int substeps : {16, 32, 64, 128}) {
    const Vector coarse = flow(system, SamplingConfig{dt, substeps}, x0, u);
    const Vector fine = flow(system, SamplingConfig{dt, 10 * substeps}, x0, u);
    steps.push_back(dt / substeps);
    errors.push_back((coarse - fine).norm());
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double lx = std::log(steps[i]), ly = std::log(errors[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  const double n = static_cast<double>(steps.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope > 3.5);
  CHECK(slope < 4.5);
}

TEST_CASE("flow reports divergence") {
  const ControlAffineSystem system = quadratic_drift_system();
  CHECK_THROWS_WITH_AS(flow(system, SamplingConfig{2.0, 10}, vec1(1.0), vec1(0.0)),
                       doctest::Contains("diverged"), std::runtime_error);
}

TEST_CASE("euler maps") {
  const ControlAffineSystem system = zone_temp_benchmark();
  const SamplingConfig sampling{0.01, 100};

  const EulerMaps at_origin = euler_maps(system, sampling, vec1(0.0));
  CHECK(at_origin.f[0] == 0.0);
  CHECK(at_origin.G(0, 0) == -0.01); // dt * g_c1(0) = 0.01 * (-1)

  const EulerMaps maps = euler_maps(system, sampling, vec1(0.6));
  CHECK((maps.g_tilde.col(0) - maps.f - maps.G.col(0)).norm() == 0.0);
  const double gc = system.control_columns(vec1(0.6))(0, 0);
  CHECK(maps.G(0, 0) == doctest::Approx(0.01 * gc).epsilon(1e-14));
}

TEST_CASE("constants from box vertices") {
  const ControlAffineSystem system = zone_temp_benchmark();
  const SystemConstants c = estimate_constants(system, 501);

  // U = [-2,2]: u_bar = 2, u_tilde = max |1 - u| = 3, max |u|_1 = 2.
  CHECK(c.u_bar == 2.0);
  CHECK(c.u_tilde == 3.0);
  CHECK(c.u_one_max == 2.0);
  CHECK(c.x_bar == 1.0);
}

TEST_CASE("zone-temp Lipschitz and supremum constants") {
  const ControlAffineSystem system = zone_temp_benchmark();
  const SystemConstants c = estimate_constants(system, 2001);

  CHECK(c.L_f == 0.0);

  // Independent arithmetic: |g_c1| peaks at x = 1, |g_c1'| at x = -1.
  const double g_bar = (2.0 * std::cos(0.2) + 1.0) / 2.0;
  const double l_g = std::abs(0.2 * std::sin(-0.2) - 1.5);
  CHECK(c.G_bar == doctest::Approx(g_bar).epsilon(1e-9));
  CHECK(c.L_G == doctest::Approx(l_g).epsilon(1e-9));
}

TEST_CASE("constant estimation is monotone under grid refinement") {
  const ControlAffineSystem system = zone_temp_benchmark();
  // Nested grids: 2R-1 points refine R points.
  const SystemConstants coarse = estimate_constants(system, 251);
  const SystemConstants mid = estimate_constants(system, 501);
  const SystemConstants fine = estimate_constants(system, 1001);

  CHECK(mid.G_bar >= coarse.G_bar);
  CHECK(fine.G_bar >= mid.G_bar);
  CHECK(std::abs(fine.G_bar - mid.G_bar) < 1e-3);

  // Vertex formulas do not depend on the resolution.
  CHECK(coarse.x_bar == fine.x_bar);
  CHECK(coarse.u_bar == fine.u_bar);
  CHECK(coarse.u_tilde == fine.u_tilde);
}

TEST_CASE("system registry") {
  CHECK(make_system("zone_temp").name == "zone_temp");
  CHECK_THROWS(make_system("not_a_system"));

  register_system("quadratic", quadratic_drift_system);
  CHECK(make_system("quadratic").name == "quadratic");
}
