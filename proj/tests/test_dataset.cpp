#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "kedmd/dataset.hpp"
#include "kedmd/io.hpp"

using namespace kedmd;

namespace {

std::vector<double> sorted_points(const CenterSet& centers) {
  std::vector<double> values;
  for (int j = 0; j < centers.d(); ++j) values.push_back(centers.points(j, 0));
  std::sort(values.begin(), values.end());
  return values;
}

Dataset small_dataset(std::uint64_t seed = 1) {
  return collect_dataset(zone_temp_benchmark(), SamplingConfig{0.01, 50},
                         KernelSpec{1, 1, 1.0}, 5, 2, seed);
}

} // namespace

TEST_CASE("center grid construction") {
  const CenterSet five = build_centers(make_box(-1.0, 1.0), 5);
  CHECK(five.points(0, 0) == 0.0);
  CHECK(five.origin_snapped == false);
  const std::vector<double> expected{-1.0, -0.5, 0.0, 0.5, 1.0};
  CHECK(sorted_points(five) == expected);

  const CenterSet three = build_centers(make_box(-1.0, 1.0), 3);
  CHECK(sorted_points(three) == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK(three.points(0, 0) == 0.0);

  CHECK_THROWS(build_centers(make_box(-1.0, 1.0), 1));
}

TEST_CASE("even grid snaps a point onto the origin") {
  const CenterSet four = build_centers(make_box(-1.0, 1.0), 4);
  CHECK(four.origin_snapped == true);
  CHECK(four.points(0, 0) == 0.0);
  CHECK(four.d() == 4);
}

TEST_CASE("tensor grid centers in 2d") {
  Box domain;
  domain.lo = Vector::Constant(2, -1.0);
  domain.hi = Vector::Constant(2, 1.0);
  const CenterSet centers = build_centers(domain, 8, 500);
  CHECK(centers.d() == 9); // 3x3 is the smallest tensor grid with >= 8 points
  CHECK(centers.points.row(0).norm() == 0.0);
}

TEST_CASE("fill distance") {
  const Matrix five = build_centers(make_box(-1.0, 1.0), 5).points;
  // Uniform grid: h is half the spacing; probe resolution bounds the error.
  CHECK(fill_distance(five, make_box(-1.0, 1.0), 10001) ==
        doctest::Approx(0.25).epsilon(1e-3));

  Matrix origin(1, 1);
  origin(0, 0) = 0.0;
  CHECK(fill_distance(origin, make_box(-1.0, 1.0), 1001) == 1.0);

  const Matrix nine = build_centers(make_box(-1.0, 1.0), 9).points;
  const double h5 = fill_distance(five, make_box(-1.0, 1.0), 10001);
  const double h9 = fill_distance(nine, make_box(-1.0, 1.0), 10001);
  CHECK(h9 == doctest::Approx(0.5 * h5).epsilon(1e-3));

  CHECK_THROWS(fill_distance(five, make_box(-1.0, 1.0), 40));
}

TEST_CASE("excitation sigma") {
  Matrix endpoints(2, 1);
  endpoints << -2.0, 2.0;
  // U U^T = diag(2, 8), so the singular values are sqrt(8) and sqrt(2).
  CHECK(input_sigma_min(endpoints) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  Matrix duplicates(2, 1);
  duplicates << 1.0, 1.0;
  CHECK(input_sigma_min(duplicates) == doctest::Approx(0.0).epsilon(1e-12));

  // Two distinct scalar inputs always excite: det(U) = u2 - u1 != 0.
  Matrix distinct(2, 1);
  distinct << 0.3, 0.7;
  CHECK(input_sigma_min(distinct) > 0.0);
}

TEST_CASE("excite_inputs respects the threshold") {
  const Box input_box = make_box(-2.0, 2.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Matrix inputs = excite_inputs(input_box, 2, seed, 0.1);
    CHECK(input_sigma_min(inputs) >= 0.1);
    CHECK(input_box.contains(inputs.row(0).transpose()));
    CHECK(input_box.contains(inputs.row(1).transpose()));
  }
  CHECK_THROWS_WITH_AS(excite_inputs(input_box, 2, 1, 100.0),
                       doctest::Contains("excitation failure"), std::runtime_error);
  CHECK_THROWS(excite_inputs(input_box, 1, 1, 0.1)); // d_j < m + 1
}

TEST_CASE("collect") {
  const ControlAffineSystem system = zone_temp_benchmark();
  const SamplingConfig sampling{0.01, 50};
  const CenterSet centers = build_centers(system.state_box, 5);

  std::vector<Matrix> plan(5, Matrix(2, 1));
  for (auto& block : plan) block << -1.0, 1.0;
  plan[0] << 0.0, 1.0; // zero input at the origin center

  const auto triplets = collect(system, sampling, centers, plan);
  REQUIRE(triplets.size() == 5);
  CHECK(triplets[0].successors(0, 0) == 0.0); // x+ = flow(0, 0) = 0
  for (const TripletSet& set : triplets) {
    CHECK(set.count() == 2);
    CHECK(set.successors.allFinite());
  }

  // d = 5 centers with 2 triplets each.
  int total = 0;
  for (const TripletSet& set : triplets) total += set.count();
  CHECK(total == 10);
}

TEST_CASE("collection is deterministic in the seed") {
  const Dataset a = small_dataset(7);
  const Dataset b = small_dataset(7);
  const Dataset c = small_dataset(8);
  CHECK(a.centers.points == b.centers.points);
  for (std::size_t j = 0; j < a.triplets.size(); ++j) {
    CHECK(a.triplets[j].inputs == b.triplets[j].inputs);
    CHECK(a.triplets[j].successors == b.triplets[j].successors);
  }
  CHECK(a.triplets[1].inputs != c.triplets[1].inputs);
}

TEST_CASE("dataset round trip is bit exact") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "kedmd_dataset_test";
  fs::remove_all(dir);

  const Dataset original = small_dataset();
  save(original, dir);
  const Dataset loaded = load(dir);

  CHECK(loaded.kernel.n == original.kernel.n);
  CHECK(loaded.kernel.scale == original.kernel.scale);
  CHECK(loaded.sampling.dt == original.sampling.dt);
  CHECK(loaded.seed == original.seed);
  CHECK(loaded.system_name == original.system_name);
  CHECK(loaded.centers.points == original.centers.points);
  CHECK(loaded.centers.fill_distance == original.centers.fill_distance);
  REQUIRE(loaded.triplets.size() == original.triplets.size());
  for (std::size_t j = 0; j < original.triplets.size(); ++j) {
    CHECK(loaded.triplets[j].inputs == original.triplets[j].inputs);
    CHECK(loaded.triplets[j].successors == original.triplets[j].successors);
    CHECK(loaded.triplets[j].sigma_min == original.triplets[j].sigma_min);
  }
  fs::remove_all(dir);
}

TEST_CASE("load validation") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "kedmd_dataset_invalid";
  fs::remove_all(dir);
  save(small_dataset(), dir);

  SUBCASE("too few triplets for one center") {
    // Drop one of center 3's two rows; m = 1 needs at least 2.
    std::ifstream in(dir / "triplets.csv");
    std::string line, kept;
    bool dropped = false;
    while (std::getline(in, line)) {
      if (!dropped && line.rfind("3,1,", 0) == 0) {
        dropped = true;
        continue;
      }
      kept += line + "\n";
    }
    in.close();
    REQUIRE(dropped);
    io::write_text_file(dir / "triplets.csv", kept);
    CHECK_THROWS_WITH_AS(load(dir), doctest::Contains("m + 1"), std::runtime_error);
  }

  SUBCASE("first center must be the origin") {
    std::string text = io::read_text_file(dir / "centers.csv");
    const std::size_t pos = text.find("0,0\n");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 4, "0,0.3\n");
    io::write_text_file(dir / "centers.csv", text);
    CHECK_THROWS_WITH_AS(load(dir), doctest::Contains("origin"), std::runtime_error);
  }

  SUBCASE("malformed numbers carry file context") {
    std::string text = io::read_text_file(dir / "centers.csv");
    const std::size_t pos = text.find("0,0\n");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 4, "0,oops\n");
    io::write_text_file(dir / "centers.csv", text);
    CHECK_THROWS_WITH_AS(load(dir), doctest::Contains("centers.csv"), std::runtime_error);
  }

  fs::remove_all(dir);
}
