#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kedmd/common.hpp"
#include "kedmd/kernel.hpp"
#include "kedmd/system.hpp"

namespace kedmd {

/// Data points x_1..x_d with the origin first, plus the fill distance of the
/// set within its domain.
struct CenterSet {
  Matrix points; // d x n, row 0 is exactly zero
  double fill_distance = 0.0;
  int fill_resolution = 0;
  bool origin_snapped = false; // true when no grid point landed on 0

  int d() const { return static_cast<int>(points.rows()); }
  int n() const { return static_cast<int>(points.cols()); }
};

/// Uniform grid of d points over the domain (tensor grid in n > 1 with the
/// smallest per-axis count whose total reaches d), reordered origin-first.
/// The grid point nearest 0 is snapped to exactly 0.
CenterSet build_centers(const Box& domain, int d, int fill_resolution = 10001);

/// Dense-probe estimate of sup_x min_j |x - x_j| over the domain.
/// `resolution` is the total probe count and must be at least 10 * d.
double fill_distance(const Matrix& centers, const Box& domain, int resolution = 10001);

/// Smallest singular value of the ones-augmented input matrix
/// [1 ... 1; u_1 ... u_dj].
double input_sigma_min(const Matrix& inputs);

/// Draws d_j inputs uniformly from the box (rows of the result) until the
/// excitation condition sigma_min >= threshold holds; at most 100 attempts.
Matrix excite_inputs(const Box& input_box, int d_j, std::uint64_t seed,
                     double sigma_threshold = 0.1);

/// Data triplets collected at one center: successors x(dt; x_j, u_jl).
struct TripletSet {
  int center_index = 0;
  Vector center;
  Matrix inputs;     // d_j x m
  Matrix successors; // d_j x n
  double sigma_min = 0.0;

  int count() const { return static_cast<int>(inputs.rows()); }
};

std::vector<TripletSet> collect(const ControlAffineSystem& system,
                                const SamplingConfig& sampling, const CenterSet& centers,
                                const std::vector<Matrix>& input_plan);

struct Dataset {
  KernelSpec kernel;
  SamplingConfig sampling;
  std::uint64_t seed = 0;
  std::string system_name;
  CenterSet centers;
  std::vector<TripletSet> triplets; // one per center, same order
};

/// Full pipeline: grid centers, excitation-checked inputs (seeded per
/// center), ground-truth collection.
Dataset collect_dataset(const ControlAffineSystem& system, const SamplingConfig& sampling,
                        const KernelSpec& kernel, int d, int d_j, std::uint64_t seed,
                        double sigma_threshold = 0.1, int fill_resolution = 10001);

/// Writes manifest.json, centers.csv, triplets.csv into `dir`.
void save(const Dataset& dataset, const std::filesystem::path& dir);
/// Loads and validates a dataset saved by `save`; round-trips bit-exactly.
Dataset load(const std::filesystem::path& dir);

} // namespace kedmd
