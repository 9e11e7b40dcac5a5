#include "kedmd/bounds.hpp"

#include <cmath>
#include <sstream>

#include "kedmd/io.hpp"

namespace kedmd {

double compute_C3(const SystemConstants& constants,
                  const std::vector<ExcitationRecord>& excitation) {
  if (excitation.empty()) throw std::invalid_argument("compute_C3: no excitation records");
  double worst = 0.0;
  for (const ExcitationRecord& rec : excitation) {
    if (!(rec.sigma_min > 0.0)) {
      throw std::invalid_argument("compute_C3: sigma_min must be positive (excitation rank condition)");
    }
    worst = std::max(worst, std::sqrt(static_cast<double>(rec.d_j)) / rec.sigma_min);
  }
  return 0.5 * (constants.L_f * constants.x_bar + constants.G_bar * constants.u_bar) *
         (constants.L_f + constants.L_G * constants.u_bar) * worst;
}

BoundConstants compute_constants(const BoundInputs& inputs) {
  if (!inputs.C1 || !inputs.C2) {
    throw std::invalid_argument(
        "compute_constants: C1 and C2 are required; supply them in the bounds "
        "configuration or calibrate C1 with the scaling study");
  }

  BoundConstants c;
  c.inputs = inputs;
  c.C1 = *inputs.C1;
  c.C2 = *inputs.C2;
  c.C3 = compute_C3(inputs.system, inputs.excitation);

  const double dt2 = inputs.dt * inputs.dt;
  const double sqrt_d = std::sqrt(static_cast<double>(inputs.d));
  const double sqrt_m = std::sqrt(static_cast<double>(inputs.m));
  const double projection = c.C1 * std::pow(inputs.h_X, inputs.s - 0.5) * inputs.phi_norm;
  const double data_term = dt2 * c.C2 * c.C3 * inputs.Kinv_norm;
  const SystemConstants& sys = inputs.system;

  c.c_x = sys.u_tilde * (projection + sqrt_d * data_term);
  c.c_u = dt2 * (sqrt_m * sqrt_d * c.C2 * c.C3 * inputs.Kinv_norm +
                 sqrt_d * 0.5 * inputs.D_phi * sys.G_bar * sys.G_bar);
  c.c_xu = sqrt_m * projection + 2.0 * sqrt_d * dt2 * inputs.D_phi * sys.L_f * sys.G_bar;
  c.c_xx = sqrt_d * dt2 * 0.5 * inputs.D_phi * sys.L_f * sys.L_f *
           (1.0 + sys.u_tilde + sys.u_one_max);
  c.c_uu = sqrt_d * dt2 * 0.5 * inputs.D_phi * sys.G_bar * sys.G_bar;
  return c;
}

double eval_bound(const BoundConstants& c, double x_norm, double u_norm) {
  return c.c_x * x_norm + c.c_u * u_norm + c.c_xx * x_norm * x_norm +
         c.c_xu * x_norm * u_norm + c.c_uu * u_norm * u_norm;
}

double eval_bound(const BoundConstants& c, const Vector& x, const Vector& u) {
  return eval_bound(c, x.norm(), u.norm());
}

ProportionalBound proportional(const BoundConstants& c) {
  ProportionalBound prop;
  prop.c_tilde_x = c.c_x + c.c_xx * c.inputs.system.x_bar + c.c_xu * c.inputs.system.u_bar;
  prop.c_tilde_u = c.c_u + c.c_uu * c.inputs.system.u_bar;
  return prop;
}

BoundInputs assemble_bound_inputs(const ControlAffineSystem& system, const Dataset& dataset,
                                  std::optional<double> C1, std::optional<double> C2,
                                  int constants_grid) {
  BoundInputs inputs;
  inputs.system = estimate_constants(system, constants_grid);
  inputs.D_phi = estimate_D_phi(dataset.kernel, dataset.centers.points, system.state_box,
                                constants_grid);
  inputs.phi_norm = rkhs_feature_norms(dataset.kernel, dataset.centers.points).stacked;
  inputs.Kinv_norm = kernel_matrix(dataset.kernel, dataset.centers.points).inverse_norm();
  inputs.h_X = dataset.centers.fill_distance;
  inputs.dt = dataset.sampling.dt;
  inputs.s = dataset.kernel.s;
  inputs.d = dataset.centers.d();
  inputs.m = system.m;
  for (const TripletSet& set : dataset.triplets) {
    inputs.excitation.push_back({set.count(), set.sigma_min});
  }
  inputs.C1 = C1;
  inputs.C2 = C2;
  return inputs;
}

namespace {

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

BilinearSurrogate fit_for(const ValidationConfig& config, const SamplingConfig& sampling,
                          int d, Dataset* dataset_out = nullptr) {
  Dataset dataset = collect_dataset(config.system, sampling, config.kernel, d, config.d_j,
                                    config.seed, config.sigma_threshold);
  BilinearSurrogate model =
      build_kedmd(dataset.centers, fit_all(dataset.triplets), config.kernel);
  if (dataset_out != nullptr) *dataset_out = std::move(dataset);
  return model;
}

} // namespace

std::vector<GridRow> residual_grid(const BilinearSurrogate& model,
                                   const ControlAffineSystem& system,
                                   const SamplingConfig& sampling, int state_grid,
                                   int input_grid) {
  const Matrix xs = tensor_grid(system.state_box, state_grid);
  const Matrix us = tensor_grid(system.input_box, input_grid);
  std::vector<GridRow> rows;
  rows.reserve(static_cast<std::size_t>(xs.rows() * us.rows()));
  for (Eigen::Index ix = 0; ix < xs.rows(); ++ix) {
    const Vector x = xs.row(ix).transpose();
    const Vector psi = model.lift(x);
    for (Eigen::Index iu = 0; iu < us.rows(); ++iu) {
      GridRow row;
      row.x = x;
      row.u = us.row(iu).transpose();
      const Vector x_next = flow(system, sampling, x, row.u);
      row.residual_norm = (model.lift(x_next) - predict_step(model, psi, row.u)).norm();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

double max_center_residual(const BilinearSurrogate& model,
                           const ControlAffineSystem& system,
                           const SamplingConfig& sampling, int input_grid) {
  const Matrix us = tensor_grid(system.input_box, input_grid);
  double worst = 0.0;
  for (int j = 0; j < model.centers.d(); ++j) {
    const Vector x = model.centers.points.row(j).transpose();
    for (Eigen::Index iu = 0; iu < us.rows(); ++iu) {
      worst = std::max(worst,
                       residual(model, system, sampling, x, us.row(iu).transpose()).norm());
    }
  }
  return worst;
}

ValidationReport validate_empirically(const ValidationConfig& config) {
  ValidationReport report;

  Dataset dataset;
  const BilinearSurrogate model = fit_for(config, config.sampling, config.d, &dataset);

  report.grid = residual_grid(model, config.system, config.sampling, config.state_grid,
                              config.input_grid);
  double sum = 0.0;
  for (const GridRow& row : report.grid) {
    report.max_residual = std::max(report.max_residual, row.residual_norm);
    sum += row.residual_norm;
  }
  report.mean_residual = report.grid.empty() ? 0.0 : sum / static_cast<double>(report.grid.size());
  report.origin_residual = residual(model, config.system, config.sampling,
                                    Vector::Zero(config.system.n),
                                    Vector::Zero(config.system.m))
                               .norm();

  // (b) dt scaling at the centers, where projection error drops out.
  for (double dt : config.dt_list) {
    SamplingConfig sampling = config.sampling;
    sampling.dt = dt;
    const BilinearSurrogate refit = fit_for(config, sampling, config.d);
    report.dt_values.push_back(dt);
    report.dt_max_center_residuals.push_back(
        max_center_residual(refit, config.system, sampling, config.input_grid));
  }
  if (report.dt_values.size() >= 2) {
    report.dt_slope = fit_loglog_slope(report.dt_values, report.dt_max_center_residuals);
  }

  // (c) fill-distance scaling at a fixed small dt.
  SamplingConfig fine = config.sampling;
  fine.dt = config.h_scaling_dt;
  for (int d : config.d_list) {
    Dataset refit_data;
    const BilinearSurrogate refit = fit_for(config, fine, d, &refit_data);
    double worst = 0.0;
    for (const GridRow& row :
         residual_grid(refit, config.system, fine, config.state_grid, config.input_grid)) {
      worst = std::max(worst, row.residual_norm);
    }
    report.d_values.push_back(d);
    report.h_values.push_back(refit_data.centers.fill_distance);
    report.d_max_residuals.push_back(worst);
  }

  // (d) bound margins for the main fit when C1, C2 are supplied.
  BoundInputs inputs =
      assemble_bound_inputs(config.system, dataset, config.C1, config.C2,
                            config.constants_grid);
  if (config.C1 && config.C2) {
    const BoundConstants constants = compute_constants(inputs);
    report.constants = constants;
    double min_margin = std::numeric_limits<double>::infinity();
    for (GridRow& row : report.grid) {
      row.bound = eval_bound(constants, row.x, row.u);
      const double margin = *row.bound - row.residual_norm;
      min_margin = std::min(min_margin, margin);
      if (margin < 0.0) ++report.violation_count;
    }
    report.min_margin = min_margin;
  }

  // (e) smallest C1 making the bound hold on the grid, with C2 fixed.
  report.calibration_C2 = config.C2.value_or(1.0);
  BoundInputs zero_c1 = inputs;
  zero_c1.C1 = 0.0;
  zero_c1.C2 = report.calibration_C2;
  const BoundConstants base = compute_constants(zero_c1);
  const double scale = std::pow(inputs.h_X, inputs.s - 0.5) * inputs.phi_norm;
  const double sqrt_m = std::sqrt(static_cast<double>(inputs.m));
  double required = 0.0;
  for (const GridRow& row : report.grid) {
    const double rest = eval_bound(base, row.x, row.u);
    if (row.residual_norm <= rest) continue;
    const double linear =
        scale * (inputs.system.u_tilde * row.x.norm() + sqrt_m * row.x.norm() * row.u.norm());
    if (linear <= 1e-300) {
      report.calibration_feasible = false;
      continue;
    }
    required = std::max(required, (row.residual_norm - rest) / linear);
  }
  report.calibrated_C1 = required;

  return report;
}

void write_report(const ValidationReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  nlohmann::json doc;
  doc["grid"] = {{"max_residual", report.max_residual},
                 {"mean_residual", report.mean_residual},
                 {"origin_residual", report.origin_residual},
                 {"points", report.grid.size()}};
  doc["dt_scaling"] = {{"dt", report.dt_values},
                       {"max_center_residual", report.dt_max_center_residuals},
                       {"slope", report.dt_slope}};
  doc["h_scaling"] = {{"d", report.d_values},
                      {"h", report.h_values},
                      {"grid_max_residual", report.d_max_residuals}};
  if (report.constants) {
    const BoundConstants& c = *report.constants;
    const ProportionalBound prop = proportional(c);
    doc["bound"] = {{"C1", c.C1},
                    {"C2", c.C2},
                    {"C3", c.C3},
                    {"c_x", c.c_x},
                    {"c_u", c.c_u},
                    {"c_xx", c.c_xx},
                    {"c_xu", c.c_xu},
                    {"c_uu", c.c_uu},
                    {"c_tilde_x", prop.c_tilde_x},
                    {"c_tilde_u", prop.c_tilde_u},
                    {"min_margin", *report.min_margin},
                    {"violations", report.violation_count},
                    {"matrix_norm_convention", "spectral; |K_X^-1| = 1/lambda_min"}};
    const BoundInputs& in = c.inputs;
    doc["bound"]["inputs"] = {{"L_f", in.system.L_f},
                              {"L_G", in.system.L_G},
                              {"G_bar", in.system.G_bar},
                              {"x_bar", in.system.x_bar},
                              {"u_bar", in.system.u_bar},
                              {"u_tilde", in.system.u_tilde},
                              {"u_one_max", in.system.u_one_max},
                              {"constants_grid", in.system.grid_resolution},
                              {"D_phi", in.D_phi},
                              {"phi_norm", in.phi_norm},
                              {"Kinv_norm", in.Kinv_norm},
                              {"h_X", in.h_X},
                              {"dt", in.dt},
                              {"s", in.s},
                              {"d", in.d},
                              {"m", in.m}};
    nlohmann::json excitation = nlohmann::json::array();
    for (const ExcitationRecord& rec : in.excitation) {
      excitation.push_back({{"d_j", rec.d_j}, {"sigma_min", rec.sigma_min}});
    }
    doc["bound"]["inputs"]["excitation"] = std::move(excitation);
  }
  doc["calibration"] = {{"C1", report.calibrated_C1 ? nlohmann::json(*report.calibrated_C1)
                                                    : nlohmann::json()},
                        {"C2_fixed", report.calibration_C2},
                        {"feasible", report.calibration_feasible}};
  io::write_text_file(dir / "report.json", doc.dump(2) + "\n");

  std::ostringstream csv;
  const int n = report.grid.empty() ? 0 : static_cast<int>(report.grid[0].x.size());
  const int m = report.grid.empty() ? 0 : static_cast<int>(report.grid[0].u.size());
  for (int i = 1; i <= n; ++i) csv << (i > 1 ? "," : "") << "x_" << i;
  for (int i = 1; i <= m; ++i) csv << ",u_" << i;
  csv << ",residual_norm,bound\n";
  for (const GridRow& row : report.grid) {
    for (int i = 0; i < n; ++i) csv << (i > 0 ? "," : "") << io::fmt(row.x[i]);
    for (int i = 0; i < m; ++i) csv << "," << io::fmt(row.u[i]);
    csv << "," << io::fmt(row.residual_norm) << ","
        << (row.bound ? io::fmt(*row.bound) : "") << "\n";
  }
  io::write_text_file(dir / "residual_grid.csv", csv.str());
}

} // namespace kedmd
