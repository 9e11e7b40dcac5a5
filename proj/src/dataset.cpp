#include "kedmd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "kedmd/io.hpp"

namespace kedmd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform double in [0, 1) from the generator's high bits; identical across
// platforms, unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Vector uniform_in_box(const Box& box, std::mt19937_64& rng) {
  Vector u(box.dim());
  for (int i = 0; i < box.dim(); ++i) {
    u[i] = box.lo[i] + uniform01(rng) * (box.hi[i] - box.lo[i]);
  }
  return u;
}

Matrix ones_augmented(const Matrix& inputs) {
  Matrix bar(inputs.cols() + 1, inputs.rows());
  bar.row(0).setOnes();
  bar.bottomRows(inputs.cols()) = inputs.transpose();
  return bar;
}

} // namespace

CenterSet build_centers(const Box& domain, int d, int fill_resolution) {
  validate(domain);
  if (d < 2) throw std::invalid_argument("build_centers: need at least 2 centers");
  if (!domain.contains(Vector::Zero(domain.dim()))) {
    throw std::invalid_argument("build_centers: domain must contain the origin");
  }

  const int n = domain.dim();
  int per_axis = d;
  if (n > 1) {
    per_axis = 2;
    while (std::pow(per_axis, n) < d) ++per_axis;
  }
  Matrix grid = tensor_grid(domain, per_axis);

  Eigen::Index nearest = 0;
  double best = grid.row(0).norm();
  for (Eigen::Index i = 1; i < grid.rows(); ++i) {
    const double dist = grid.row(i).norm();
    if (dist < best) {
      best = dist;
      nearest = i;
    }
  }

  const double spacing = (domain.hi[0] - domain.lo[0]) / (per_axis - 1);
  CenterSet centers;
  centers.origin_snapped = best > 1e-9 * spacing;
  grid.row(nearest).setZero();

  centers.points.resize(grid.rows(), n);
  centers.points.row(0) = grid.row(nearest);
  Eigen::Index out = 1;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    if (i != nearest) centers.points.row(out++) = grid.row(i);
  }

  centers.fill_resolution = fill_resolution;
  centers.fill_distance = fill_distance(centers.points, domain, fill_resolution);
  return centers;
}

double fill_distance(const Matrix& centers, const Box& domain, int resolution) {
  validate(domain);
  if (centers.rows() < 1) throw std::invalid_argument("fill_distance: empty center set");
  if (resolution < 10 * centers.rows()) {
    throw std::invalid_argument("fill_distance: resolution must be >= 10 * d");
  }

  const int n = domain.dim();
  int per_axis = resolution;
  if (n > 1) {
    per_axis = std::max(2, static_cast<int>(std::round(
                               std::pow(static_cast<double>(resolution), 1.0 / n))));
  }
  const Matrix probes = tensor_grid(domain, per_axis);

  double h = 0.0;
  for (Eigen::Index p = 0; p < probes.rows(); ++p) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centers.rows(); ++j) {
      nearest = std::min(nearest, (probes.row(p) - centers.row(j)).norm());
    }
    h = std::max(h, nearest);
  }
  return h;
}

double input_sigma_min(const Matrix& inputs) {
  return ones_augmented(inputs).jacobiSvd().singularValues().minCoeff();
}

Matrix excite_inputs(const Box& input_box, int d_j, std::uint64_t seed,
                     double sigma_threshold) {
  validate(input_box);
  const int m = input_box.dim();
  if (d_j < m + 1) {
    throw std::invalid_argument("excite_inputs: need d_j >= m + 1 inputs");
  }

  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix inputs(d_j, m);
    for (int l = 0; l < d_j; ++l) inputs.row(l) = uniform_in_box(input_box, rng).transpose();
    if (input_sigma_min(inputs) >= sigma_threshold) return inputs;
  }
  throw std::runtime_error("excite_inputs: excitation failure after 100 attempts");
}

std::vector<TripletSet> collect(const ControlAffineSystem& system,
                                const SamplingConfig& sampling, const CenterSet& centers,
                                const std::vector<Matrix>& input_plan) {
  validate(system);
  validate(sampling);
  if (static_cast<int>(input_plan.size()) != centers.d()) {
    throw std::invalid_argument("collect: one input block per center required");
  }

  std::vector<TripletSet> triplets(centers.d());
  for (int j = 0; j < centers.d(); ++j) {
    TripletSet& set = triplets[j];
    set.center_index = j;
    set.center = centers.points.row(j).transpose();
    set.inputs = input_plan[j];
    set.sigma_min = input_sigma_min(set.inputs);
    set.successors.resize(set.inputs.rows(), system.n);
    for (int l = 0; l < set.inputs.rows(); ++l) {
      try {
        set.successors.row(l) =
            flow(system, sampling, set.center, set.inputs.row(l).transpose()).transpose();
      } catch (const std::exception& e) {
        throw std::runtime_error("collect: center " + std::to_string(j) + ", input " +
                                 std::to_string(l) + ": " + e.what());
      }
    }
  }
  return triplets;
}

Dataset collect_dataset(const ControlAffineSystem& system, const SamplingConfig& sampling,
                        const KernelSpec& kernel, int d, int d_j, std::uint64_t seed,
                        double sigma_threshold, int fill_resolution) {
  validate(kernel);
  Dataset dataset;
  dataset.kernel = kernel;
  dataset.sampling = sampling;
  dataset.seed = seed;
  dataset.system_name = system.name;
  dataset.centers = build_centers(system.state_box, d, fill_resolution);

  std::vector<Matrix> plan(dataset.centers.d());
  for (int j = 0; j < dataset.centers.d(); ++j) {
    plan[j] = excite_inputs(system.input_box, d_j,
                            splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(j))),
                            sigma_threshold);
  }
  dataset.triplets = collect(system, sampling, dataset.centers, plan);
  return dataset;
}

namespace {

std::string centers_csv(const Dataset& dataset) {
  std::ostringstream out;
  out << "j";
  for (int i = 1; i <= dataset.centers.n(); ++i) out << ",x_" << i;
  out << "\n";
  for (int j = 0; j < dataset.centers.d(); ++j) {
    out << j;
    for (int i = 0; i < dataset.centers.n(); ++i) {
      out << "," << io::fmt(dataset.centers.points(j, i));
    }
    out << "\n";
  }
  return out.str();
}

std::string triplets_csv(const Dataset& dataset) {
  const int n = dataset.centers.n();
  const int m = dataset.triplets.empty() ? 0 : static_cast<int>(dataset.triplets[0].inputs.cols());
  std::ostringstream out;
  out << "j,l";
  for (int i = 1; i <= m; ++i) out << ",u_" << i;
  for (int i = 1; i <= n; ++i) out << ",xplus_" << i;
  out << "\n";
  for (const TripletSet& set : dataset.triplets) {
    for (int l = 0; l < set.count(); ++l) {
      out << set.center_index << "," << l;
      for (int i = 0; i < m; ++i) out << "," << io::fmt(set.inputs(l, i));
      for (int i = 0; i < n; ++i) out << "," << io::fmt(set.successors(l, i));
      out << "\n";
    }
  }
  return out.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& file, std::size_t columns) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue; // header
    auto fields = io::split_csv_line(line);
    if (fields.size() != columns) {
      throw std::runtime_error(file + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(columns) + " fields, got " +
                               std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

double field_double(const std::vector<std::string>& row, std::size_t idx,
                    const std::string& file, std::size_t row_no) {
  try {
    return io::parse_double(row[idx]);
  } catch (const std::exception& e) {
    throw std::runtime_error(file + ": row " + std::to_string(row_no) + ", field " +
                             std::to_string(idx) + ": " + e.what());
  }
}

} // namespace

void save(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["kernel"] = {{"n", dataset.kernel.n}, {"s", dataset.kernel.s},
                        {"scale", dataset.kernel.scale}};
  manifest["sampling"] = {{"dt", dataset.sampling.dt}, {"substeps", dataset.sampling.substeps}};
  manifest["seed"] = dataset.seed;
  manifest["system"] = dataset.system_name;
  manifest["fill"] = {{"distance", dataset.centers.fill_distance},
                      {"resolution", dataset.centers.fill_resolution},
                      {"origin_snapped", dataset.centers.origin_snapped}};

  io::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  io::write_text_file(dir / "centers.csv", centers_csv(dataset));
  io::write_text_file(dir / "triplets.csv", triplets_csv(dataset));
}

Dataset load(const std::filesystem::path& dir) {
  Dataset dataset;

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("manifest.json: " + std::string(e.what()));
  }
  dataset.kernel.n = manifest.at("kernel").at("n").get<int>();
  dataset.kernel.s = manifest.at("kernel").at("s").get<int>();
  dataset.kernel.scale = manifest.at("kernel").at("scale").get<double>();
  dataset.sampling.dt = manifest.at("sampling").at("dt").get<double>();
  dataset.sampling.substeps = manifest.at("sampling").at("substeps").get<int>();
  dataset.seed = manifest.at("seed").get<std::uint64_t>();
  dataset.system_name = manifest.at("system").get<std::string>();
  dataset.centers.fill_distance = manifest.at("fill").at("distance").get<double>();
  dataset.centers.fill_resolution = manifest.at("fill").at("resolution").get<int>();
  dataset.centers.origin_snapped = manifest.at("fill").at("origin_snapped").get<bool>();
  validate(dataset.kernel);
  validate(dataset.sampling);

  const int n = dataset.kernel.n;
  const std::string centers_file = (dir / "centers.csv").string();
  const auto center_rows = parse_csv(io::read_text_file(dir / "centers.csv"), centers_file,
                                     static_cast<std::size_t>(n) + 1);
  if (center_rows.empty()) throw std::runtime_error(centers_file + ": no centers");

  dataset.centers.points.resize(static_cast<Eigen::Index>(center_rows.size()), n);
  for (std::size_t r = 0; r < center_rows.size(); ++r) {
    for (int i = 0; i < n; ++i) {
      dataset.centers.points(static_cast<Eigen::Index>(r), i) =
          field_double(center_rows[r], static_cast<std::size_t>(i) + 1, centers_file, r + 2);
    }
  }
  if (dataset.centers.points.row(0).norm() != 0.0) {
    throw std::runtime_error(centers_file + ": first center must be the origin");
  }

  const std::string triplets_file = (dir / "triplets.csv").string();
  const std::string triplets_text = io::read_text_file(dir / "triplets.csv");
  const std::string header = triplets_text.substr(0, triplets_text.find('\n'));
  const std::size_t cols = io::split_csv_line(header).size();
  if (cols < static_cast<std::size_t>(n) + 3) {
    throw std::runtime_error(triplets_file + ": malformed header '" + header + "'");
  }
  const int m = static_cast<int>(cols) - n - 2;
  const auto triplet_rows = parse_csv(triplets_text, triplets_file, cols);

  dataset.triplets.assign(static_cast<std::size_t>(dataset.centers.d()), TripletSet{});
  std::vector<std::vector<std::size_t>> per_center(dataset.centers.d());
  for (std::size_t r = 0; r < triplet_rows.size(); ++r) {
    const int j = static_cast<int>(field_double(triplet_rows[r], 0, triplets_file, r + 2));
    if (j < 0 || j >= dataset.centers.d()) {
      throw std::runtime_error(triplets_file + ": row " + std::to_string(r + 2) +
                               ": center index " + std::to_string(j) + " out of range");
    }
    per_center[j].push_back(r);
  }

  for (int j = 0; j < dataset.centers.d(); ++j) {
    const auto& rows = per_center[j];
    if (static_cast<int>(rows.size()) < m + 1) {
      throw std::runtime_error(triplets_file + ": center " + std::to_string(j) + " has " +
                               std::to_string(rows.size()) +
                               " triplets, need at least m + 1 = " + std::to_string(m + 1));
    }
    TripletSet& set = dataset.triplets[j];
    set.center_index = j;
    set.center = dataset.centers.points.row(j).transpose();
    set.inputs.resize(static_cast<Eigen::Index>(rows.size()), m);
    set.successors.resize(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& row = triplet_rows[rows[k]];
      for (int i = 0; i < m; ++i) {
        set.inputs(static_cast<Eigen::Index>(k), i) =
            field_double(row, static_cast<std::size_t>(i) + 2, triplets_file, rows[k] + 2);
      }
      for (int i = 0; i < n; ++i) {
        set.successors(static_cast<Eigen::Index>(k), i) = field_double(
            row, static_cast<std::size_t>(m + i) + 2, triplets_file, rows[k] + 2);
      }
    }
    set.sigma_min = input_sigma_min(set.inputs);
  }
  return dataset;
}

} // namespace kedmd
