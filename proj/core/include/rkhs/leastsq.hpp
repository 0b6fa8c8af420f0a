#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <vector>

#include "rkhs/sampling_density.hpp"
#include "rkhs/spectral_kernel.hpp"

namespace rkhs {

using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

inline constexpr double kRankTolerance = 1e-10;

// Weighted design L~ (n x (m-1)), l_{j,k} = eta_k(x^j) / sqrt(rho(x^j)), and H = L~* L~ / n.
// Rows at nodes with zero density are zero.
struct DesignSystem {
  MatrixXc design;
  MatrixXc gram;
  Eigen::VectorXd row_weights;      // 1 / sqrt(rho(x^j)), or 0
  Eigen::VectorXd singular_values;  // of L~, descending
  double lambda_min = 0.0;          // extreme eigenvalues of H (Hermitian eigensolver)
  double lambda_max = 0.0;
  bool full_rank = false;
  std::size_t n = 0;
  std::size_t m = 0;

  // ||(L~* L~)^{-1} L~*|| from the singular values of L~.
  double pinv_norm() const;
  // The same quantity as (n lambda_min)^{-1/2}.
  double pinv_norm_from_gram() const;
  // (L~* L~)^{-1} L~*, (m-1) x n, from the thin SVD.
  MatrixXc pseudo_inverse() const;
};

DesignSystem assemble_design(const SpectralKernelModel& model, const SamplingDensity& density,
                             const NodeSet& X, std::size_t m);

struct Coefficients {
  VectorXc values;         // c~_1 .. c~_{m-1}
  double residual = 0.0;   // ||L~ c~ - g||
  bool flagged = false;    // rank-deficient design, values are not meaningful
  bool iterative = false;  // solved by LSQR
};

enum class Solver { Auto, QR, LSQR };

struct SolveOptions {
  Solver solver = Solver::Auto;
  std::size_t qr_limit = 2000;  // Auto uses LSQR beyond this many columns
  double lsqr_tolerance = 1e-14;
  std::size_t lsqr_max_iterations = 0;  // 0: 4 * columns + 100
};

// Weighted least squares from samples f(x^j).
Coefficients recover(const DesignSystem& ds, const VectorXc& samples, const SolveOptions& opts = {});
Coefficients recover(const SpectralKernelModel& model, const SamplingDensity& density,
                     const NodeSet& X, std::size_t m, const VectorXc& samples,
                     const SolveOptions& opts = {});

// Evaluates sum_k c_k eta_k(x).
cplx evaluate_approximant(const SpectralKernelModel& model, const Coefficients& c, double x);

struct LsqrResult {
  VectorXc x;
  std::size_t iterations = 0;
  double residual = 0.0;
};

// Paige-Saunders LSQR for min ||A x - b||.
LsqrResult lsqr(const MatrixXc& A, const VectorXc& b, double tolerance, std::size_t max_iterations);

struct EigCheck {
  bool lambda_min_ok = false;   // lambda_min(H) >= 1/2
  bool norm_window_ok = false;  // pinv norm in [sqrt(2/(3n)), sqrt(2/n)]
  double pinv_norm = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

EigCheck gram_eig_check(const DesignSystem& ds);

// floor(n / (14 r log n)).
std::size_t choose_m(std::size_t n, double r);
// Largest m >= 1 with N(m) <= n / (c r log n) for the given spectral function.
std::size_t max_m_spectral(const std::function<double(std::size_t)>& spectral_function,
                           std::size_t n, double r, double c);

}  // namespace rkhs
