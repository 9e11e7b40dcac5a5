#include "kedmd/surrogate.hpp"

#include <Eigen/QR>

#include "kedmd/io.hpp"

namespace kedmd {

namespace {

Vector predict_core(const Matrix& a, const Matrix& b0, const std::vector<Matrix>& b,
                    const Vector& psi, const Vector& u) {
  if (psi.size() != a.rows()) {
    throw std::invalid_argument("predict_step: lifted state has wrong dimension");
  }
  if (u.size() != b0.cols()) {
    throw std::invalid_argument("predict_step: input has wrong dimension");
  }
  Vector next = a * psi + b0 * u;
  for (std::size_t i = 0; i < b.size(); ++i) {
    next += u[static_cast<Eigen::Index>(i)] * (b[i] * psi);
  }
  return next;
}

template <class Model>
Rollout rollout_core(const Model& model, const Vector& x0, const Matrix& inputs) {
  Rollout result;
  result.psi.resize(inputs.rows() + 1, model.dim());
  Vector psi = model.lift(x0);
  result.psi.row(0) = psi.transpose();
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    psi = predict_step(model, psi, inputs.row(t).transpose());
    if (!psi.allFinite()) {
      result.truncated = true;
      result.psi.conservativeResize(t + 1, Eigen::NoChange);
      return result;
    }
    result.psi.row(t + 1) = psi.transpose();
  }
  return result;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty()) throw std::runtime_error("model: expected matrix rows");
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = static_cast<Eigen::Index>(rows[0].size());
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != c) {
      throw std::runtime_error("model: ragged matrix rows");
    }
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

} // namespace

Vector BilinearSurrogate::lift(const Vector& x) const {
  return lifted_state(kernel, centers.points, x);
}

BilinearSurrogate build_kedmd(const CenterSet& centers,
                              const std::vector<LocalEstimate>& estimates,
                              const KernelSpec& kernel, double condition_warn_threshold) {
  validate(kernel);
  const int d = centers.d();
  if (static_cast<int>(estimates.size()) != d) {
    throw std::invalid_argument("build_kedmd: need one estimate per center");
  }
  if (estimates[0].f_hat.norm() != 0.0) {
    throw std::invalid_argument("build_kedmd: origin estimate must have f_hat = 0");
  }
  const int m = static_cast<int>(estimates[0].G_hat.cols());

  const KernelMatrix k_x = kernel_matrix(kernel, centers.points);

  // Row j of an image kernel matrix is Phi(F(x_j))^T, cf. the kEDMD
  // propagation formula.
  Matrix k_f(d, d);
  for (int j = 0; j < d; ++j) {
    k_f.row(j) = features(kernel, centers.points, estimates[j].f_hat).transpose();
  }

  BilinearSurrogate model;
  model.kernel = kernel;
  model.centers = centers;
  model.A = k_x.solve(k_f).transpose();
  model.phi0 = features(kernel, centers.points, Vector::Zero(centers.n()));

  model.B.reserve(m);
  for (int i = 0; i < m; ++i) {
    Matrix k_gi(d, d);
    for (int j = 0; j < d; ++j) {
      const Vector image = estimates[j].f_hat + estimates[j].G_hat.col(i);
      k_gi.row(j) = features(kernel, centers.points, image).transpose();
    }
    model.B.push_back(k_x.solve(Matrix(k_gi - k_f)).transpose());
  }

  model.B0.resize(d, m);
  for (int i = 0; i < m; ++i) model.B0.col(i) = model.B[static_cast<std::size_t>(i)] * model.phi0;

  model.report.condition = k_x.condition_estimate();
  if (model.report.condition > condition_warn_threshold) {
    model.report.warnings.push_back("kernel matrix condition estimate " +
                                    io::fmt(model.report.condition) + " exceeds " +
                                    io::fmt(condition_warn_threshold));
  }
  return model;
}

Vector predict_step(const BilinearSurrogate& model, const Vector& psi, const Vector& u) {
  return predict_core(model.A, model.B0, model.B, psi, u);
}

Rollout rollout(const BilinearSurrogate& model, const Vector& x0, const Matrix& inputs) {
  return rollout_core(model, x0, inputs);
}

Vector residual(const BilinearSurrogate& model, const ControlAffineSystem& system,
                const SamplingConfig& sampling, const Vector& x, const Vector& u) {
  const Vector x_next = flow(system, sampling, x, u);
  return model.lift(x_next) - predict_step(model, model.lift(x), u);
}

double interpolation_residual(const BilinearSurrogate& model,
                              const std::vector<LocalEstimate>& estimates) {
  double worst = 0.0;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    const Vector phi_j =
        features(model.kernel, model.centers.points, model.centers.points.row(j).transpose());
    const Vector image =
        features(model.kernel, model.centers.points, estimates[j].f_hat);
    worst = std::max(worst, (model.A * phi_j - image).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

void save_model(const BilinearSurrogate& model, const std::vector<LocalEstimate>& estimates,
                const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["kernel"] = {{"n", model.kernel.n}, {"s", model.kernel.s}, {"scale", model.kernel.scale}};
  doc["centers"] = {{"points", matrix_to_json(model.centers.points)},
                    {"fill_distance", model.centers.fill_distance},
                    {"fill_resolution", model.centers.fill_resolution},
                    {"origin_snapped", model.centers.origin_snapped}};
  doc["A"] = matrix_to_json(model.A);
  nlohmann::json b_list = nlohmann::json::array();
  for (const Matrix& b : model.B) b_list.push_back(matrix_to_json(b));
  doc["B"] = std::move(b_list);
  doc["B0"] = matrix_to_json(model.B0);
  nlohmann::json phi0 = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.phi0.size(); ++i) phi0.push_back(model.phi0[i]);
  doc["phi0"] = std::move(phi0);
  nlohmann::json estimate_list = nlohmann::json::array();
  for (const LocalEstimate& estimate : estimates) {
    nlohmann::json f_hat = nlohmann::json::array();
    for (Eigen::Index i = 0; i < estimate.f_hat.size(); ++i) f_hat.push_back(estimate.f_hat[i]);
    estimate_list.push_back({{"j", estimate.center_index},
                             {"f_hat", std::move(f_hat)},
                             {"G_hat", matrix_to_json(estimate.G_hat)},
                             {"residual_norm", estimate.residual_norm}});
  }
  doc["estimates"] = std::move(estimate_list);
  doc["build_report"] = {{"condition", model.report.condition},
                         {"warnings", model.report.warnings}};
  io::write_text_file(path, doc.dump(2) + "\n");
}

LoadedModel load_model(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }

  LoadedModel loaded;
  BilinearSurrogate& model = loaded.model;
  model.kernel.n = doc.at("kernel").at("n").get<int>();
  model.kernel.s = doc.at("kernel").at("s").get<int>();
  model.kernel.scale = doc.at("kernel").at("scale").get<double>();
  validate(model.kernel);
  model.centers.points = matrix_from_json(doc.at("centers").at("points"));
  model.centers.fill_distance = doc.at("centers").at("fill_distance").get<double>();
  model.centers.fill_resolution = doc.at("centers").at("fill_resolution").get<int>();
  model.centers.origin_snapped = doc.at("centers").at("origin_snapped").get<bool>();
  model.A = matrix_from_json(doc.at("A"));
  for (const auto& b : doc.at("B")) model.B.push_back(matrix_from_json(b));
  model.B0 = matrix_from_json(doc.at("B0"));
  const auto& phi0 = doc.at("phi0");
  model.phi0.resize(static_cast<Eigen::Index>(phi0.size()));
  for (Eigen::Index i = 0; i < model.phi0.size(); ++i) model.phi0[i] = phi0[i].get<double>();
  for (const auto& entry : doc.at("estimates")) {
    LocalEstimate estimate;
    estimate.center_index = entry.at("j").get<int>();
    const auto& f_hat = entry.at("f_hat");
    estimate.f_hat.resize(static_cast<Eigen::Index>(f_hat.size()));
    for (Eigen::Index i = 0; i < estimate.f_hat.size(); ++i) {
      estimate.f_hat[i] = f_hat[i].get<double>();
    }
    estimate.G_hat = matrix_from_json(entry.at("G_hat"));
    estimate.residual_norm = entry.at("residual_norm").get<double>();
    estimate.center = model.centers.points.row(estimate.center_index).transpose();
    loaded.estimates.push_back(std::move(estimate));
  }
  model.report.condition = doc.at("build_report").at("condition").get<double>();
  for (const auto& w : doc.at("build_report").at("warnings")) {
    model.report.warnings.push_back(w.get<std::string>());
  }
  return loaded;
}

int monomial_dim(int n) {
  // Monomials of total degree 1..3: C(n,1..3) with repetition.
  return n + n * (n + 1) / 2 + n * (n + 1) * (n + 2) / 6;
}

Vector monomial_lift(const Vector& x) {
  const int n = static_cast<int>(x.size());
  Vector psi(monomial_dim(n));
  Eigen::Index k = 0;
  for (int i = 0; i < n; ++i) psi[k++] = x[i];
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) psi[k++] = x[i] * x[j];
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int l = j; l < n; ++l) psi[k++] = x[i] * x[j] * x[l];
    }
  }
  return psi;
}

BilinearFit fit_bilinear_lifted(const Matrix& lifted, const Matrix& inputs,
                                const Matrix& lifted_next) {
  const Eigen::Index samples = lifted.rows();
  const Eigen::Index dim = lifted.cols();
  const Eigen::Index m = inputs.cols();
  if (samples == 0 || lifted_next.rows() != samples || inputs.rows() != samples) {
    throw std::invalid_argument("fit_bilinear_lifted: inconsistent sample counts");
  }

  // Regressor row: [psi, u, u_1 psi, ..., u_m psi].
  const Eigen::Index cols = dim + m + m * dim;
  Matrix regressors(samples, cols);
  for (Eigen::Index r = 0; r < samples; ++r) {
    regressors.block(r, 0, 1, dim) = lifted.row(r);
    regressors.block(r, dim, 1, m) = inputs.row(r);
    for (Eigen::Index i = 0; i < m; ++i) {
      regressors.block(r, dim + m + i * dim, 1, dim) = inputs(r, i) * lifted.row(r);
    }
  }

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(regressors);
  const Matrix theta = cod.solve(lifted_next).transpose(); // dim x cols

  BilinearFit fit;
  fit.rank_deficient = cod.rank() < cols;
  fit.A = theta.leftCols(dim);
  fit.B0 = theta.middleCols(dim, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    fit.B.push_back(theta.middleCols(dim + m + i * dim, dim));
  }
  return fit;
}

Vector BaselineSurrogate::lift(const Vector& x) const {
  if (kind == DictionaryKind::kernel_features) {
    return lifted_state(kernel, centers.points, x);
  }
  return monomial_lift(x);
}

BaselineSurrogate build_baseline(const std::vector<TripletSet>& triplets,
                                 DictionaryKind kind, const KernelSpec* kernel,
                                 const CenterSet* centers) {
  if (triplets.empty()) throw std::invalid_argument("build_baseline: no data");
  if (kind == DictionaryKind::kernel_features && (kernel == nullptr || centers == nullptr)) {
    throw std::invalid_argument(
        "build_baseline: kernel-features dictionary needs a kernel and centers");
  }

  BaselineSurrogate model;
  model.kind = kind;
  model.state_dim = static_cast<int>(triplets[0].center.size());
  if (kind == DictionaryKind::kernel_features) {
    model.kernel = *kernel;
    model.centers = *centers;
  }

  Eigen::Index total = 0;
  for (const TripletSet& set : triplets) total += set.count();
  const Eigen::Index dim = model.lift(triplets[0].center).size();
  const Eigen::Index m = triplets[0].inputs.cols();

  Matrix lifted(total, dim), lifted_next(total, dim), inputs(total, m);
  Eigen::Index r = 0;
  for (const TripletSet& set : triplets) {
    const Vector psi = model.lift(set.center);
    for (int l = 0; l < set.count(); ++l, ++r) {
      lifted.row(r) = psi.transpose();
      inputs.row(r) = set.inputs.row(l);
      lifted_next.row(r) = model.lift(set.successors.row(l).transpose()).transpose();
    }
  }

  BilinearFit fit = fit_bilinear_lifted(lifted, inputs, lifted_next);
  model.A = std::move(fit.A);
  model.B0 = std::move(fit.B0);
  model.B = std::move(fit.B);
  model.rank_deficient = fit.rank_deficient;
  return model;
}

Vector predict_step(const BaselineSurrogate& model, const Vector& psi, const Vector& u) {
  return predict_core(model.A, model.B0, model.B, psi, u);
}

Rollout rollout(const BaselineSurrogate& model, const Vector& x0, const Matrix& inputs) {
  return rollout_core(model, x0, inputs);
}

} // namespace kedmd
