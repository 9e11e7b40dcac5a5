#pragma once

#include <filesystem>
#include <vector>

#include "kedmd/dataset.hpp"
#include "kedmd/regress.hpp"

namespace kedmd {

struct BuildReport {
  double condition = 0.0; // condition estimate of K_X
  std::vector<std::string> warnings;
};

/// kEDMD bilinear surrogate on the lifted state Psi(x) = Phi(x) - Phi(0):
///   Psi+ = A Psi + B0 u + sum_i u_i B_i Psi.
struct BilinearSurrogate {
  KernelSpec kernel;
  CenterSet centers;
  Matrix A;              // d x d
  std::vector<Matrix> B; // m matrices, d x d
  Matrix B0;             // d x m, column i = B_i Phi(0)
  Vector phi0;           // Phi(0)
  BuildReport report;

  int dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.size()); }
  Vector lift(const Vector& x) const;
};

/// Assembles A = K_f(X)^T K_X^-1 and B_i = (K_gi(X) - K_f(X))^T K_X^-1 from
/// the per-center estimates; image arguments use f_hat and
/// f_hat + G_hat e_i. Conditioning above `condition_warn_threshold` adds a
/// build-report warning.
BilinearSurrogate build_kedmd(const CenterSet& centers,
                              const std::vector<LocalEstimate>& estimates,
                              const KernelSpec& kernel,
                              double condition_warn_threshold = 1e12);

Vector predict_step(const BilinearSurrogate& model, const Vector& psi, const Vector& u);

struct Rollout {
  Matrix psi;            // (steps+1) x D, row t is Psi_t
  bool truncated = false;
};

/// Iterates the surrogate from Psi(x0) under the input sequence (rows of
/// `inputs`). A non-finite iterate truncates the trajectory and sets the flag.
Rollout rollout(const BilinearSurrogate& model, const Vector& x0, const Matrix& inputs);

/// One-step residual against the true plant:
/// r = Psi(x(dt; x, u)) - predict_step(Psi(x), u).
Vector residual(const BilinearSurrogate& model, const ControlAffineSystem& system,
                const SamplingConfig& sampling, const Vector& x, const Vector& u);

/// max_j |A Phi(x_j) - Phi(f_hat(x_j))|_inf, the kernel interpolation
/// identity at the centers.
double interpolation_residual(const BilinearSurrogate& model,
                              const std::vector<LocalEstimate>& estimates);

/// Model files carry the per-center estimates alongside the surrogate
/// matrices; numbers round-trip bit-exactly.
void save_model(const BilinearSurrogate& model, const std::vector<LocalEstimate>& estimates,
                const std::filesystem::path& path);

struct LoadedModel {
  BilinearSurrogate model;
  std::vector<LocalEstimate> estimates;
};

LoadedModel load_model(const std::filesystem::path& path);

enum class DictionaryKind {
  kernel_features, // the same lifted features Psi as the kEDMD surrogate
  monomials3,      // all monomials of total degree 1..3, zero at the origin
};

/// Stacked least-squares fit of Z+ ~ A Z + B0 U + sum_i U_i B_i Z over lifted
/// data rows. Rank-deficient regressors fall back to the minimum-norm
/// solution.
struct BilinearFit {
  Matrix A;
  Matrix B0;
  std::vector<Matrix> B;
  bool rank_deficient = false;
};

BilinearFit fit_bilinear_lifted(const Matrix& lifted, const Matrix& inputs,
                                const Matrix& lifted_next);

/// Pooled-regression bilinear baseline in a fixed dictionary (stand-in for
/// SafEDMD-style estimation).
struct BaselineSurrogate {
  DictionaryKind kind = DictionaryKind::monomials3;
  KernelSpec kernel;  // kernel_features only
  CenterSet centers;  // kernel_features only
  int state_dim = 0;
  Matrix A;
  Matrix B0;
  std::vector<Matrix> B;
  bool rank_deficient = false;

  int dim() const { return static_cast<int>(A.rows()); }
  Vector lift(const Vector& x) const;
};

/// `kernel`/`centers` are required for the kernel-features dictionary and
/// ignored otherwise.
BaselineSurrogate build_baseline(const std::vector<TripletSet>& triplets,
                                 DictionaryKind kind, const KernelSpec* kernel = nullptr,
                                 const CenterSet* centers = nullptr);

Vector predict_step(const BaselineSurrogate& model, const Vector& psi, const Vector& u);
Rollout rollout(const BaselineSurrogate& model, const Vector& x0, const Matrix& inputs);

/// Monomial dictionary of total degree 1..3 in graded lexicographic order;
/// [x, x^2, x^3] for n = 1.
Vector monomial_lift(const Vector& x);
int monomial_dim(int n);

} // namespace kedmd
