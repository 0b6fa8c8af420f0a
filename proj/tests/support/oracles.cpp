#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

cplx eta(rkhs::BasisKind basis, std::size_t j, double x) {
  const double pi = std::numbers::pi;
  if (basis == rkhs::BasisKind::Cosine) {
    if (j == 1) return 1.0;
    return std::sqrt(2.0) * std::cos(pi * static_cast<double>(j - 1) * x);
  }
  // 1, e^{2 pi i x}, e^{-2 pi i x}, e^{4 pi i x}, ...
  const auto h = static_cast<long>(j / 2);
  const long k = j == 1 ? 0 : (j % 2 == 0 ? h : -h);
  return std::polar(1.0, 2.0 * pi * static_cast<double>(k) * x);
}

std::vector<double> midpoint_grid(std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t p = 0; p < points; ++p) g[p] = (static_cast<double>(p) + 0.5) / static_cast<double>(points);
  return g;
}

namespace {

Mat eval_matrix(rkhs::BasisKind basis, const std::vector<double>& xs, std::size_t first, std::size_t count,
                const std::vector<double>* scale) {
  Mat A(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t k = 0; k < count; ++k)
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          eta(basis, first + k, xs[i]) * (scale ? (*scale)[k] : 1.0);
  return A;
}

}  // namespace

Mat recovery_form(rkhs::BasisKind basis, const std::vector<double>& lambda, const std::vector<double>& nodes,
                  const std::vector<double>& rho, std::size_t m, std::size_t grid_points) {
  const std::size_t N = lambda.size();
  std::vector<double> sig(N);
  for (std::size_t k = 0; k < N; ++k) sig[k] = std::sqrt(lambda[k]);
  const Mat F = eval_matrix(basis, nodes, 1, N, &sig);   // f_k(x_i)
  Mat V = eval_matrix(basis, nodes, 1, m - 1, nullptr);  // eta_j(x_i)
  Mat Fw = F;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double w = 1.0 / std::sqrt(rho[i]);
    V.row(static_cast<Eigen::Index>(i)) *= w;
    Fw.row(static_cast<Eigen::Index>(i)) *= w;
  }
  // Coefficients of S f_k, one column per k.
  const Mat C = V.completeOrthogonalDecomposition().solve(Fw);
  const std::vector<double> grid = midpoint_grid(grid_points);
  const Mat Fg = eval_matrix(basis, grid, 1, N, &sig);
  const Mat Vg = eval_matrix(basis, grid, 1, m - 1, nullptr);
  const Mat R = Fg - Vg * C;
  Mat Q = R.adjoint() * R / static_cast<double>(grid_points);
  return 0.5 * (Q + Q.adjoint());
}

Mat discretization_form(rkhs::BasisKind basis, const std::vector<double>& lambda,
                        const std::vector<double>& nodes, const std::vector<double>& weights,
                        std::size_t grid_points) {
  const std::size_t N = lambda.size();
  std::vector<double> sig(N);
  for (std::size_t k = 0; k < N; ++k) sig[k] = std::sqrt(lambda[k]);
  const std::vector<double> grid = midpoint_grid(grid_points);
  const Mat Fg = eval_matrix(basis, grid, 1, N, &sig);
  Mat Fx = eval_matrix(basis, nodes, 1, N, &sig);
  for (std::size_t i = 0; i < nodes.size(); ++i) Fx.row(static_cast<Eigen::Index>(i)) *= std::sqrt(weights[i]);
  Mat Q = Fg.adjoint() * Fg / static_cast<double>(grid_points) -
          Fx.adjoint() * Fx / static_cast<double>(nodes.size());
  return 0.5 * (Q + Q.adjoint());
}

SupResult unit_ball_sup(const Mat& Q, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  const auto N = Q.rows();
  Eigen::VectorXcd best, a(N);
  SupResult out;
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index k = 0; k < N; ++k) a(k) = {nd(gen), nd(gen)};
    a.normalize();
    const double v = std::abs(a.dot(Q * a).real());
    if (v > out.monte_carlo) {
      out.monte_carlo = v;
      best = a;
    }
  }
  Eigen::VectorXcd x = best;
  double prev = 0.0, val = out.monte_carlo;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXcd y = Q * x;
    const double nrm = y.norm();
    if (nrm == 0.0) break;
    // |a* Q a| stalls between +lambda and -lambda eigenvectors of equal size; ||Q x|| <= ||Q||
    // does not, and for Hermitian Q the norm is the sup.
    val = std::max(val, (Q * (y / nrm)).norm());
    x = y / nrm;
    if (std::abs(val - prev) <= 1e-9 * std::max(1.0, val)) break;
    prev = val;
  }
  out.refined = std::max(val, out.monte_carlo);
  return out;
}

double integrate(const std::function<double(double)>& f) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-13);
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace oracle
