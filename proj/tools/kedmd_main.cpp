#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "kedmd/bounds.hpp"
#include "kedmd/io.hpp"

namespace {

namespace fs = std::filesystem;
using kedmd::Matrix;
using kedmd::Vector;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string system = "zone_temp";
  kedmd::KernelSpec kernel;
  kedmd::SamplingConfig sampling;
  int d = 9;
  std::vector<int> d_list{5, 7, 9, 11, 13, 15, 17, 19};
  int d_j = 2;
  std::uint64_t seed = 1;
  double sigma_threshold = 0.1;
  std::optional<double> C1;
  std::optional<double> C2;
  int constants_grid = 2001;
  int horizon = 100;
  int realizations = 20;
  int state_grid = 41;
  int input_grid = 41;
  std::vector<double> dt_list{0.1, 0.05, 0.025, 0.0125};
  std::vector<int> scaling_d_list{5, 9, 17};
  double h_scaling_dt = 0.005;
};

ExperimentConfig parse_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  if (!fs::exists(path)) {
    throw ConfigError("config file '" + path.string() + "' not found");
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(kedmd::io::read_text_file(path));
  } catch (const std::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }

  ExperimentConfig config;
  try {
    kedmd::io::require_keys_subset(
        doc, {"system", "kernel", "sampling", "data", "bounds", "experiment"}, "config");
    if (doc.contains("system")) config.system = doc["system"].get<std::string>();
    if (doc.contains("kernel")) {
      const auto& k = doc["kernel"];
      kedmd::io::require_keys_subset(k, {"n", "s", "scale"}, "config.kernel");
      if (k.contains("n")) config.kernel.n = k["n"].get<int>();
      if (k.contains("s")) config.kernel.s = k["s"].get<int>();
      if (k.contains("scale")) config.kernel.scale = k["scale"].get<double>();
    }
    if (doc.contains("sampling")) {
      const auto& s = doc["sampling"];
      kedmd::io::require_keys_subset(s, {"dt", "substeps"}, "config.sampling");
      if (s.contains("dt")) config.sampling.dt = s["dt"].get<double>();
      if (s.contains("substeps")) config.sampling.substeps = s["substeps"].get<int>();
    }
    if (doc.contains("data")) {
      const auto& d = doc["data"];
      kedmd::io::require_keys_subset(d, {"d", "d_list", "d_j", "seed", "sigma_threshold"},
                                     "config.data");
      if (d.contains("d")) config.d = d["d"].get<int>();
      if (d.contains("d_list")) config.d_list = d["d_list"].get<std::vector<int>>();
      if (d.contains("d_j")) config.d_j = d["d_j"].get<int>();
      if (d.contains("seed")) config.seed = d["seed"].get<std::uint64_t>();
      if (d.contains("sigma_threshold")) {
        config.sigma_threshold = d["sigma_threshold"].get<double>();
      }
    }
    if (doc.contains("bounds")) {
      const auto& b = doc["bounds"];
      kedmd::io::require_keys_subset(b, {"C1", "C2", "constants_grid"}, "config.bounds");
      if (b.contains("C1")) config.C1 = b["C1"].get<double>();
      if (b.contains("C2")) config.C2 = b["C2"].get<double>();
      if (b.contains("constants_grid")) config.constants_grid = b["constants_grid"].get<int>();
    }
    if (doc.contains("experiment")) {
      const auto& e = doc["experiment"];
      kedmd::io::require_keys_subset(e,
                                     {"horizon", "realizations", "state_grid", "input_grid",
                                      "dt_list", "d_list", "h_scaling_dt"},
                                     "config.experiment");
      if (e.contains("horizon")) config.horizon = e["horizon"].get<int>();
      if (e.contains("realizations")) config.realizations = e["realizations"].get<int>();
      if (e.contains("state_grid")) config.state_grid = e["state_grid"].get<int>();
      if (e.contains("input_grid")) config.input_grid = e["input_grid"].get<int>();
      if (e.contains("dt_list")) config.dt_list = e["dt_list"].get<std::vector<double>>();
      if (e.contains("d_list")) config.scaling_d_list = e["d_list"].get<std::vector<int>>();
      if (e.contains("h_scaling_dt")) config.h_scaling_dt = e["h_scaling_dt"].get<double>();
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }

  if (seed_override) config.seed = *seed_override;
  try {
    kedmd::validate(config.kernel);
    kedmd::validate(config.sampling);
  } catch (const std::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return config;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)) ^
                    (0xBF58476D1CE4E5B9ULL * (index + 1));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Matrix draw_inputs(const kedmd::Box& box, int horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix inputs(horizon, box.dim());
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < box.dim(); ++i) {
      const double u01 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      inputs(t, i) = box.lo[i] + u01 * (box.hi[i] - box.lo[i]);
    }
  }
  return inputs;
}

int cmd_collect(const ExperimentConfig& config, const fs::path& out) {
  const kedmd::ControlAffineSystem system = kedmd::make_system(config.system);
  const kedmd::Dataset dataset =
      kedmd::collect_dataset(system, config.sampling, config.kernel, config.d, config.d_j,
                             config.seed, config.sigma_threshold);

  if (dataset.centers.origin_snapped) {
    std::cout << "warning: grid did not contain the origin; nearest point snapped to 0\n";
  }
  std::cout << "h_X = " << kedmd::io::fmt(dataset.centers.fill_distance) << " (resolution "
            << dataset.centers.fill_resolution << ")\n";
  for (const kedmd::TripletSet& set : dataset.triplets) {
    std::cout << "sigma_min[j=" << set.center_index << "] = " << kedmd::io::fmt(set.sigma_min)
              << "\n";
  }

  if (dataset.centers.fill_distance >= 0.5 * config.kernel.scale) {
    std::cerr << "error: fill distance " << kedmd::io::fmt(dataset.centers.fill_distance)
              << " violates h_X < 0.5 * scale = "
              << kedmd::io::fmt(0.5 * config.kernel.scale) << "\n";
    return 1;
  }

  kedmd::save(dataset, out);
  std::cout << "dataset written to " << out.string() << "\n";
  return 0;
}

int cmd_fit(const ExperimentConfig&, const fs::path& data_dir, const fs::path& out) {
  const kedmd::Dataset dataset = kedmd::load(data_dir);
  const std::vector<kedmd::LocalEstimate> estimates = kedmd::fit_all(dataset.triplets);
  const kedmd::BilinearSurrogate model =
      kedmd::build_kedmd(dataset.centers, estimates, dataset.kernel);

  std::cout << "condition(K_X) = " << kedmd::io::fmt(model.report.condition) << "\n";
  std::cout << "interpolation residual = "
            << kedmd::io::fmt(kedmd::interpolation_residual(model, estimates)) << "\n";
  for (const std::string& warning : model.report.warnings) {
    std::cout << "warning: " << warning << "\n";
  }

  fs::create_directories(out);
  kedmd::save_model(model, estimates, out / "model.json");
  std::cout << "model written to " << (out / "model.json").string() << "\n";
  return 0;
}

int cmd_benchmark_prediction(const ExperimentConfig& config, const fs::path& out) {
  const kedmd::ControlAffineSystem system = kedmd::make_system(config.system);

  // Shared input realizations: same seeds across methods and data sizes.
  std::vector<Matrix> input_seqs(static_cast<std::size_t>(config.realizations));
  std::vector<Matrix> true_states(static_cast<std::size_t>(config.realizations));
  for (int r = 0; r < config.realizations; ++r) {
    input_seqs[r] = draw_inputs(system.input_box, config.horizon, derive_seed(config.seed, 1, r));
    Matrix states(config.horizon + 1, system.n);
    Vector x = Vector::Zero(system.n);
    states.row(0) = x.transpose();
    for (int t = 0; t < config.horizon; ++t) {
      x = kedmd::flow(system, config.sampling, x, input_seqs[r].row(t).transpose());
      states.row(t + 1) = x.transpose();
    }
    true_states[r] = std::move(states);
  }

  struct Method {
    std::string name;
    std::function<Vector(const Vector&)> lift;
    std::function<kedmd::Rollout(const Vector&, const Matrix&)> run;
  };

  std::ostringstream csv;
  csv << "method,d,t,mean_err,min_err,max_err\n";

  for (int d : config.d_list) {
    const kedmd::Dataset dataset =
        kedmd::collect_dataset(system, config.sampling, config.kernel, d, config.d_j,
                               config.seed, config.sigma_threshold);
    const kedmd::BilinearSurrogate kedmd_model =
        kedmd::build_kedmd(dataset.centers, kedmd::fit_all(dataset.triplets), config.kernel);
    const kedmd::BaselineSurrogate kernel_baseline = kedmd::build_baseline(
        dataset.triplets, kedmd::DictionaryKind::kernel_features, &config.kernel,
        &dataset.centers);
    const kedmd::BaselineSurrogate monomial_baseline =
        kedmd::build_baseline(dataset.triplets, kedmd::DictionaryKind::monomials3);

    const std::vector<Method> methods = {
        {"kedmd", [&](const Vector& x) { return kedmd_model.lift(x); },
         [&](const Vector& x0, const Matrix& u) { return kedmd::rollout(kedmd_model, x0, u); }},
        {"baseline_kernel", [&](const Vector& x) { return kernel_baseline.lift(x); },
         [&](const Vector& x0, const Matrix& u) {
           return kedmd::rollout(kernel_baseline, x0, u);
         }},
        {"baseline_monomial", [&](const Vector& x) { return monomial_baseline.lift(x); },
         [&](const Vector& x0, const Matrix& u) {
           return kedmd::rollout(monomial_baseline, x0, u);
         }},
    };

    for (const Method& method : methods) {
      Matrix errors(config.horizon + 1, config.realizations);
      for (int r = 0; r < config.realizations; ++r) {
        const kedmd::Rollout traj =
            method.run(Vector::Zero(system.n), input_seqs[static_cast<std::size_t>(r)]);
        for (int t = 0; t <= config.horizon; ++t) {
          if (t < traj.psi.rows()) {
            const Vector truth =
                method.lift(true_states[static_cast<std::size_t>(r)].row(t).transpose());
            errors(t, r) = (traj.psi.row(t).transpose() - truth).norm();
          } else {
            errors(t, r) = std::numeric_limits<double>::infinity();
          }
        }
      }
      for (int t = 0; t <= config.horizon; ++t) {
        csv << method.name << "," << d << "," << t << ","
            << kedmd::io::fmt(errors.row(t).mean()) << ","
            << kedmd::io::fmt(errors.row(t).minCoeff()) << ","
            << kedmd::io::fmt(errors.row(t).maxCoeff()) << "\n";
      }
    }
  }

  fs::create_directories(out);
  kedmd::io::write_text_file(out / "prediction_error.csv", csv.str());
  std::cout << "prediction benchmark written to " << (out / "prediction_error.csv").string()
            << "\n";
  return 0;
}

int cmd_scaling_study(const ExperimentConfig& config, const fs::path& out) {
  kedmd::ValidationConfig validation;
  validation.system = kedmd::make_system(config.system);
  validation.kernel = config.kernel;
  validation.sampling = config.sampling;
  validation.d = config.d;
  validation.d_j = config.d_j;
  validation.seed = config.seed;
  validation.sigma_threshold = config.sigma_threshold;
  validation.state_grid = config.state_grid;
  validation.input_grid = config.input_grid;
  validation.dt_list = config.dt_list;
  validation.d_list = config.scaling_d_list;
  validation.h_scaling_dt = config.h_scaling_dt;
  validation.constants_grid = config.constants_grid;
  validation.C1 = config.C1;
  validation.C2 = config.C2;

  const kedmd::ValidationReport report = kedmd::validate_empirically(validation);
  kedmd::write_report(report, out);

  std::ostringstream dt_csv;
  dt_csv << "dt,max_center_residual\n";
  for (std::size_t i = 0; i < report.dt_values.size(); ++i) {
    dt_csv << kedmd::io::fmt(report.dt_values[i]) << ","
           << kedmd::io::fmt(report.dt_max_center_residuals[i]) << "\n";
  }
  kedmd::io::write_text_file(out / "dt_scaling.csv", dt_csv.str());

  std::ostringstream h_csv;
  h_csv << "d,h,grid_max_residual\n";
  for (std::size_t i = 0; i < report.d_values.size(); ++i) {
    h_csv << report.d_values[i] << "," << kedmd::io::fmt(report.h_values[i]) << ","
          << kedmd::io::fmt(report.d_max_residuals[i]) << "\n";
  }
  kedmd::io::write_text_file(out / "h_scaling.csv", h_csv.str());

  std::cout << "grid max residual = " << kedmd::io::fmt(report.max_residual) << "\n";
  std::cout << "residual at origin = " << kedmd::io::fmt(report.origin_residual) << "\n";
  std::cout << "dt slope at centers = " << kedmd::io::fmt(report.dt_slope) << "\n";
  if (report.min_margin) {
    std::cout << "bound margin (min over grid) = " << kedmd::io::fmt(*report.min_margin)
              << " with " << report.violation_count << " violations\n";
  }
  if (report.calibrated_C1) {
    std::cout << "calibrated C1 = " << kedmd::io::fmt(*report.calibrated_C1)
              << " (C2 fixed at " << kedmd::io::fmt(report.calibration_C2) << ")"
              << (report.calibration_feasible ? "" : " [infeasible points present]") << "\n";
  }
  std::cout << "report written to " << out.string() << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "kedmd: bilinear surrogate models of control-affine systems via kernel EDMD\n"
      "with Wendland kernels, plus deterministic residual bounds.\n"};
  app.require_subcommand(1);
  app.footer(
      "Config keys (JSON, all optional): system; kernel{n,s,scale};\n"
      "sampling{dt,substeps}; data{d,d_list,d_j,seed,sigma_threshold};\n"
      "bounds{C1,C2,constants_grid}; experiment{horizon,realizations,state_grid,\n"
      "input_grid,dt_list,d_list,h_scaling_dt}.\n"
      "Defaults: system=zone_temp, kernel{1,1,1.0}, sampling{0.01,100}, d=9,\n"
      "d_list=5..19 odd, d_j=2, seed=1, sigma_threshold=0.1, constants_grid=2001,\n"
      "horizon=100, realizations=20, state_grid=41, input_grid=41,\n"
      "dt_list={0.1,0.05,0.025,0.0125}, experiment.d_list={5,9,17}, h_scaling_dt=0.005.");

  std::string config_path;
  std::string out_dir = "out";
  std::string data_dir;
  std::optional<std::uint64_t> seed_override;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", seed_override, "override config.data.seed");
  };

  CLI::App* collect = app.add_subcommand(
      "collect", "sample data triplets on a uniform center grid and save them");
  add_common(collect);
  CLI::App* fit = app.add_subcommand(
      "fit", "estimate local dynamics and build the kEDMD surrogate from a dataset");
  add_common(fit);
  fit->add_option("--data", data_dir, "dataset directory produced by collect")->required();
  CLI::App* benchmark = app.add_subcommand(
      "benchmark-prediction",
      "open-loop prediction error of the surrogate and two baselines over data sizes");
  add_common(benchmark);
  CLI::App* scaling = app.add_subcommand(
      "scaling-study", "residual grids, dt/fill-distance scaling, and bound margins");
  add_common(scaling);

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig config = parse_config(config_path, seed_override);
    if (collect->parsed()) return cmd_collect(config, out_dir);
    if (fit->parsed()) return cmd_fit(config, data_dir, out_dir);
    if (benchmark->parsed()) return cmd_benchmark_prediction(config, out_dir);
    if (scaling->parsed()) return cmd_scaling_study(config, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
