#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "rkhs/errors.hpp"
#include "rkhs/sampling_density.hpp"

using namespace rkhs;

namespace {

SpectralKernelModel cosine_sobolev(double atom = 0.0) {
  return {Basis(BasisKind::Cosine), EigenvalueRule::sobolev(1.0), atom};
}
SpectralKernelModel cosine_geometric(double atom = 0.0) {
  return {Basis(BasisKind::Cosine), EigenvalueRule::geometric(0.6), atom};
}

}  // namespace

TEST_CASE("every density integrates to one") {
  for (const auto& model : {cosine_sobolev(), cosine_sobolev(0.4), cosine_geometric(), cosine_geometric(0.2)}) {
    for (auto kind : {DensityKind::Plain, DensityKind::Spectral, DensityKind::SpectralAtom, DensityKind::Diagonal}) {
      for (std::size_t m : {2, 5}) {
        const SamplingDensity rho(model, kind, m);
        const double mass = oracle::integrate([&](double x) { return rho(x); });
        CAPTURE(to_string(kind));
        CAPTURE(m);
        CHECK(std::abs(mass - 1.0) < 1e-8);
      }
    }
  }
}

TEST_CASE("Fourier mixtures are uniform") {
  SpectralKernelModel F(Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), 0.3, Truncation{1024, INFINITY});
  for (auto kind : {DensityKind::Spectral, DensityKind::SpectralAtom, DensityKind::Diagonal}) {
    const SamplingDensity rho(F, kind, 5);
    CHECK(rho.is_uniform());
    CHECK(rho(0.37) == doctest::Approx(1.0));
  }
}

TEST_CASE("degenerate densities are rejected") {
  SpectralKernelModel K(Basis(BasisKind::Cosine), EigenvalueRule::list({1.0, 0.5, 0.25}));
  CHECK_THROWS_AS(SamplingDensity(K, DensityKind::Spectral, 6), DegenerateDensityError);
  CHECK_NOTHROW(SamplingDensity(K, DensityKind::Spectral, 4));
}

TEST_CASE("sampler passes a Kolmogorov-Smirnov test against the quadrature CDF") {
  for (auto kind : {DensityKind::Spectral, DensityKind::Diagonal, DensityKind::SpectralAtom}) {
    const auto model = cosine_sobolev(0.2);
    const SamplingDensity rho(model, kind, 4);
    const NodeSet X = draw_nodes(rho, 20000, 11);
    // CDF tabulated by quadrature on 400 cells, linear in between.
    const int P = 400;
    std::vector<double> table(P + 1, 0.0);
    for (int p = 0; p < P; ++p) {
      const double a = double(p) / P, h = 1.0 / P;
      table[p + 1] = table[p] + h * oracle::integrate([&](double u) { return rho(a + h * u); });
    }
    auto cdf = [&](double x) {
      const double s = x * P;
      const int i = std::min(P - 1, int(s));
      return table[i] + (s - i) * (table[i + 1] - table[i]);
    };
    const double d = oracle::ks_statistic(X.nodes, cdf);
    CAPTURE(to_string(kind));
    // 1% critical value 1.628 / sqrt(n)
    CHECK(d < 1.628 / std::sqrt(20000.0));
  }
}

TEST_CASE("nodes carry their density values and are distinct") {
  const auto model = cosine_geometric();
  const SamplingDensity rho(model, DensityKind::Spectral, 3);
  const NodeSet X = draw_nodes(rho, 500, 3, 9);
  REQUIRE(X.size() == 500);
  std::vector<double> s = X.nodes;
  std::sort(s.begin(), s.end());
  CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  for (std::size_t i = 0; i < X.size(); i += 50) CHECK(X.density[i] == doctest::Approx(rho(X.nodes[i])));
  const NodeSet Y = draw_nodes(rho, 500, 3, 9);
  CHECK(X.nodes == Y.nodes);
  const NodeSet Z = draw_nodes(rho, 500, 3, 10);
  CHECK(X.nodes != Z.nodes);
}

TEST_CASE("node CSV round trip is exact") {
  const auto model = cosine_sobolev();
  const SamplingDensity rho(model, DensityKind::Diagonal);
  const NodeSet X = draw_nodes(rho, 50, 1);
  std::stringstream ss;
  write_nodes_csv(ss, X);
  CHECK(ss.str().rfind("index,x,rho\r\n", 0) == 0);
  const NodeSet Y = read_nodes_csv(ss);
  CHECK(Y.nodes == X.nodes);
  CHECK(Y.density == X.density);
}

TEST_CASE("inverse raised-cosine CDF") {
  for (double u : {0.0, 1e-9, 0.1, 0.5, 0.77, 1.0}) {
    const double y = inverse_raised_cosine_cdf(u);
    CHECK(std::abs(y + std::sin(2.0 * std::numbers::pi * y) / (2.0 * std::numbers::pi) - u) < 1e-12);
  }
}

TEST_CASE("normalized kernel of a uniform density is the kernel") {
  SpectralKernelModel F(Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), 0.0, Truncation{512, INFINITY});
  const SamplingDensity rho(F, DensityKind::Spectral, 5);
  const NormalizedKernel nk(F, rho);
  CHECK(nk.spectral_function(5) == doctest::Approx(F.spectral_function(5)).epsilon(1e-9));
  CHECK(std::abs(nk.eval(0.1, 0.3) - F.eval_kernel(0.1, 0.3)) < 1e-12);
}

TEST_CASE("spectral density bounds the normalized spectral function") {
  // rho >= head/2, so N~(m) <= 2 (m - 1).
  const auto model = cosine_sobolev();
  const SamplingDensity rho(model, DensityKind::Spectral, 6);
  const NormalizedKernel nk(model, rho);
  CHECK(nk.spectral_function(6) <= 2.0 * 5.0 + 1e-9);
}

