#include <doctest.h>

#include <cmath>

#include "rkhs/errors.hpp"
#include "rkhs/leastsq.hpp"
#include "rkhs/rng.hpp"

using namespace rkhs;

namespace {

struct Instance {
  SpectralKernelModel model;
  SamplingDensity rho;
  NodeSet X;
  DesignSystem ds;
};

// Random small instance number i: alternating bases and densities, n in [10, 80], m in [2, 9].
Instance make_instance(std::uint64_t i) {
  CounterRng g(99, i);
  const BasisKind b = i % 2 ? BasisKind::Cosine : BasisKind::Fourier;
  SpectralKernelModel model(Basis(b), EigenvalueRule::sobolev(1.0 + g.uniform()), 0.0, Truncation{64, INFINITY});
  const DensityKind dk = i % 3 == 0 ? DensityKind::Plain : i % 3 == 1 ? DensityKind::Spectral : DensityKind::Diagonal;
  const std::size_t m = 2 + g.below(8);
  const std::size_t n = 10 + g.below(71);
  SamplingDensity rho(model, dk, m);
  NodeSet X = draw_nodes(rho, n, 7, i);
  DesignSystem ds = assemble_design(model, rho, X, m);
  return {model, rho, X, ds};
}

VectorXc random_samples(std::size_t n, std::uint64_t seed) {
  CounterRng g(seed, 1);
  VectorXc v(static_cast<Eigen::Index>(n));
  for (auto& z : v) z = {g.normal(), g.normal()};
  return v;
}

}  // namespace

TEST_CASE("least-squares invariants on 100 random instances") {
  int checked = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Instance I = make_instance(i);
    if (!I.ds.full_rank) continue;
    ++checked;
    const std::size_t n = I.X.size();
    const VectorXc f = random_samples(n, 2 * i), g = random_samples(n, 2 * i + 1);
    const cplx alpha{0.3, -1.2}, beta{2.0, 0.5};
    const auto cf = recover(I.ds, f), cg = recover(I.ds, g);
    const auto cfg = recover(I.ds, alpha * f + beta * g);
    const double scale = cf.values.norm() + cg.values.norm() + 1.0;
    // linearity
    CHECK((cfg.values - (alpha * cf.values + beta * cg.values)).norm() <= 1e-10 * scale);
    // idempotence: samples of the approximant reproduce its coefficients
    VectorXc h(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) h(static_cast<Eigen::Index>(j)) = evaluate_approximant(I.model, cf, I.X.nodes[j]);
    CHECK((recover(I.ds, h).values - cf.values).norm() <= 1e-10 * scale);
    // normal equations
    const VectorXc gw = f.cwiseProduct(I.ds.row_weights.cast<cplx>());
    const VectorXc ne = I.ds.design.adjoint() * (I.ds.design * cf.values - gw);
    CHECK(ne.norm() <= 1e-8 * (I.ds.design.norm() * gw.norm()));
    // norm identity
    CHECK(I.ds.pinv_norm() == doctest::Approx(I.ds.pinv_norm_from_gram()).epsilon(1e-10));
    Eigen::JacobiSVD<MatrixXc> svd(I.ds.pseudo_inverse());
    CHECK(svd.singularValues()(0) == doctest::Approx(I.ds.pinv_norm()).epsilon(1e-10));
  }
  CHECK(checked >= 90);
}

TEST_CASE("functions in the approximation space are recovered exactly") {
  SpectralKernelModel model(Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), 0.0, Truncation{64, INFINITY});
  const SamplingDensity rho(model, DensityKind::Plain);
  const NodeSet X = draw_nodes(rho, 40, 5);
  const std::size_t m = 6;
  const DesignSystem ds = assemble_design(model, rho, X, m);
  REQUIRE(ds.full_rank);
  VectorXc c(5);
  c << cplx{1, 0}, cplx{0, 2}, cplx{-1, 1}, cplx{0.5, 0}, cplx{0, -0.25};
  VectorXc s(40);
  for (int i = 0; i < 40; ++i) {
    cplx v = 0;
    for (int k = 0; k < 5; ++k) v += c(k) * model.eigenfunction(k + 1, X.nodes[i]);
    s(i) = v;
  }
  CHECK((recover(ds, s).values - c).norm() < 1e-12);
}

TEST_CASE("LSQR agrees with QR") {
  SpectralKernelModel model(Basis(BasisKind::Cosine), EigenvalueRule::sobolev(1.0), 0.0, Truncation{64, INFINITY});
  const SamplingDensity rho(model, DensityKind::Spectral, 12);
  const NodeSet X = draw_nodes(rho, 300, 5);
  const DesignSystem ds = assemble_design(model, rho, X, 12);
  const VectorXc s = random_samples(300, 3);
  SolveOptions q, l;
  q.solver = Solver::QR;
  l.solver = Solver::LSQR;
  const auto a = recover(ds, s, q), b = recover(ds, s, l);
  CHECK(b.iterative);
  CHECK((a.values - b.values).norm() < 1e-9 * a.values.norm());
}

TEST_CASE("rank-deficient designs are flagged") {
  SpectralKernelModel model(Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), 0.0, Truncation{64, INFINITY});
  const SamplingDensity rho(model, DensityKind::Plain);
  const NodeSet X = NodeSet::from_points(rho, {0.25, 0.25, 0.25, 0.25});
  const DesignSystem ds = assemble_design(model, rho, X, 4);
  CHECK_FALSE(ds.full_rank);
  const auto c = recover(ds, random_samples(4, 1));
  CHECK(c.flagged);
  CHECK_FALSE(gram_eig_check(ds).lambda_min_ok);
}

TEST_CASE("design preconditions") {
  SpectralKernelModel model(Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), 0.0, Truncation{64, INFINITY});
  const SamplingDensity rho(model, DensityKind::Plain);
  const NodeSet X = draw_nodes(rho, 3, 1);
  CHECK_THROWS_AS(assemble_design(model, rho, X, 1), PreconditionError);
  CHECK_THROWS_AS(assemble_design(model, rho, X, 5), PreconditionError);
}

TEST_CASE("equispaced Fourier nodes give H = I") {
  SpectralKernelModel model(Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), 0.0, Truncation{64, INFINITY});
  const SamplingDensity rho(model, DensityKind::Plain);
  std::vector<double> pts(16);
  for (int i = 0; i < 16; ++i) pts[i] = i / 16.0;
  const DesignSystem ds = assemble_design(model, rho, NodeSet::from_points(rho, pts), 8);
  CHECK(ds.lambda_min == doctest::Approx(1.0));
  CHECK(ds.lambda_max == doctest::Approx(1.0));
  const EigCheck e = gram_eig_check(ds);
  CHECK(e.lambda_min_ok);
  CHECK(e.norm_window_ok);
  CHECK(e.pinv_norm == doctest::Approx(1.0 / 4.0));
}

TEST_CASE("m rules") {
  // floor(1000 / (28 ln 1000)) = floor(5.17)
  CHECK(choose_m(1000, 2.0) == 5);
  CHECK_THROWS_AS(choose_m(2, 2.0), PreconditionError);
  CHECK_THROWS_AS(choose_m(1000, 1.0), PreconditionError);
  // cosine N(m) = 2m - 3 <= 2000 / (14 ln 2000) = 18.8 -> m = 10; c = 10 gives 13.2 -> m = 8
  auto N = [](std::size_t m) { return 2.0 * double(m) - 3.0; };
  CHECK(max_m_spectral(N, 2000, 2.0, 7.0) == 10);
  CHECK(max_m_spectral(N, 2000, 2.0, 10.0) == 8);
}
