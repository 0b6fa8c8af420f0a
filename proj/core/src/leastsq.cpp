#include "rkhs/leastsq.hpp"

#include <algorithm>
#include <cmath>

#include "rkhs/errors.hpp"

namespace rkhs {

double DesignSystem::pinv_norm() const {
  if (!full_rank) return INFINITY;
  return 1.0 / singular_values(singular_values.size() - 1);
}

double DesignSystem::pinv_norm_from_gram() const {
  if (!(lambda_min > 0.0)) return INFINITY;
  return 1.0 / std::sqrt(static_cast<double>(n) * lambda_min);
}

MatrixXc DesignSystem::pseudo_inverse() const {
  if (!full_rank) throw PreconditionError("pseudo-inverse of a rank-deficient design");
  Eigen::BDCSVD<MatrixXc> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd inv = svd.singularValues().cwiseInverse();
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

DesignSystem assemble_design(const SpectralKernelModel& model, const SamplingDensity& density,
                             const NodeSet& X, std::size_t m) {
  (void)density;
  const std::size_t n = X.size();
  if (m < 2) throw PreconditionError("design needs m >= 2");
  if (n < m - 1) throw PreconditionError("design needs n >= m - 1");
  if (X.density.size() != n) throw PreconditionError("node set without density values");

  DesignSystem ds;
  ds.n = n;
  ds.m = m;
  const auto cols = static_cast<Eigen::Index>(m - 1);
  ds.design.resize(static_cast<Eigen::Index>(n), cols);
  ds.row_weights.resize(static_cast<Eigen::Index>(n));
  std::vector<cplx> row(m - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double rho = X.density[i];
    ds.row_weights(ii) = rho > 0.0 ? 1.0 / std::sqrt(rho) : 0.0;
    model.basis().eval_range(X.nodes[i], 1, row);
    for (Eigen::Index k = 0; k < cols; ++k) ds.design(ii, k) = row[static_cast<std::size_t>(k)] * ds.row_weights(ii);
  }
  ds.gram = ds.design.adjoint() * ds.design / static_cast<double>(n);
  ds.gram = 0.5 * (ds.gram + ds.gram.adjoint()).eval();

  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(ds.gram, Eigen::EigenvaluesOnly);
  ds.lambda_min = eig.eigenvalues()(0);
  ds.lambda_max = eig.eigenvalues()(cols - 1);

  Eigen::BDCSVD<MatrixXc> svd(ds.design);
  ds.singular_values = svd.singularValues();
  const double smax = ds.singular_values(0);
  const double smin = ds.singular_values(cols - 1);
  ds.full_rank = n >= m - 1 && smax > 0.0 && smin >= kRankTolerance * smax;
  return ds;
}

LsqrResult lsqr(const MatrixXc& A, const VectorXc& b, double tolerance, std::size_t max_iterations) {
  LsqrResult out;
  out.x = VectorXc::Zero(A.cols());
  VectorXc u = b;
  double beta = u.norm();
  if (beta == 0.0) return out;
  u /= beta;
  VectorXc v = A.adjoint() * u;
  double alpha = v.norm();
  if (alpha == 0.0) {
    out.residual = beta;
    return out;
  }
  v /= alpha;
  VectorXc w = v;
  double phibar = beta, rhobar = alpha;
  const double bnorm = beta;
  double anorm = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    u = A * v - alpha * u;
    beta = u.norm();
    if (beta > 0.0) u /= beta;
    anorm = std::sqrt(anorm * anorm + alpha * alpha + beta * beta);
    v = A.adjoint() * u - beta * v;
    alpha = v.norm();
    if (alpha > 0.0) v /= alpha;

    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho, s = beta / rho;
    const double theta = s * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = s * phibar;
    out.x += (phi / rho) * w;
    w = v - (theta / rho) * w;
    out.iterations = it + 1;
    // Stop when the normal-equation residual |phibar * alpha * c| is tiny relative to ||A|| ||r||.
    const double arnorm = phibar * alpha * std::abs(c);
    if (phibar <= tolerance * bnorm || arnorm <= tolerance * anorm * phibar || alpha == 0.0) break;
  }
  out.residual = (A * out.x - b).norm();
  return out;
}

Coefficients recover(const DesignSystem& ds, const VectorXc& samples, const SolveOptions& opts) {
  if (static_cast<std::size_t>(samples.size()) != ds.n)
    throw PreconditionError("sample count does not match the node count");
  Coefficients c;
  c.values = VectorXc::Zero(static_cast<Eigen::Index>(ds.m - 1));
  if (!ds.full_rank) {
    c.flagged = true;
    return c;
  }
  const VectorXc g = samples.cwiseProduct(ds.row_weights.cast<cplx>());
  const bool use_lsqr = opts.solver == Solver::LSQR ||
                        (opts.solver == Solver::Auto && ds.m - 1 > opts.qr_limit);
  if (use_lsqr) {
    const std::size_t iters = opts.lsqr_max_iterations ? opts.lsqr_max_iterations : 4 * (ds.m - 1) + 100;
    auto r = lsqr(ds.design, g, opts.lsqr_tolerance, iters);
    c.values = std::move(r.x);
    c.iterative = true;
  } else {
    c.values = ds.design.householderQr().solve(g);
  }
  c.residual = (ds.design * c.values - g).norm();
  return c;
}

Coefficients recover(const SpectralKernelModel& model, const SamplingDensity& density,
                     const NodeSet& X, std::size_t m, const VectorXc& samples, const SolveOptions& opts) {
  return recover(assemble_design(model, density, X, m), samples, opts);
}

cplx evaluate_approximant(const SpectralKernelModel& model, const Coefficients& c, double x) {
  const auto k = static_cast<std::size_t>(c.values.size());
  if (k == 0) return {0.0, 0.0};
  std::vector<cplx> row(k);
  model.basis().eval_range(x, 1, row);
  cplx s{0.0, 0.0};
  for (std::size_t j = 0; j < k; ++j) s += c.values(static_cast<Eigen::Index>(j)) * row[j];
  return s;
}

EigCheck gram_eig_check(const DesignSystem& ds) {
  EigCheck e;
  const auto n = static_cast<double>(ds.n);
  e.lower = std::sqrt(2.0 / (3.0 * n));
  e.upper = std::sqrt(2.0 / n);
  e.lambda_min_ok = ds.full_rank && ds.lambda_min >= 0.5;
  e.pinv_norm = ds.pinv_norm();
  e.norm_window_ok = ds.full_rank && e.pinv_norm >= e.lower && e.pinv_norm <= e.upper;
  return e;
}

std::size_t choose_m(std::size_t n, double r) {
  if (n < 3) throw PreconditionError("choose_m needs n >= 3");
  if (!(r > 1.0)) throw PreconditionError("choose_m needs r > 1");
  const auto nd = static_cast<double>(n);
  return static_cast<std::size_t>(std::floor(nd / (14.0 * r * std::log(nd))));
}

std::size_t max_m_spectral(const std::function<double(std::size_t)>& spectral_function,
                           std::size_t n, double r, double c) {
  if (n < 3) throw PreconditionError("needs n >= 3");
  const auto nd = static_cast<double>(n);
  const double cap = nd / (c * r * std::log(nd));
  std::size_t m = 1;
  while (m < n && spectral_function(m + 1) <= cap) ++m;
  return m;
}

}  // namespace rkhs
