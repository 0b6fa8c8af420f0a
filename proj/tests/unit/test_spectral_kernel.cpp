#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "rkhs/errors.hpp"
#include "rkhs/spectral_kernel.hpp"

using namespace rkhs;
constexpr double pi = std::numbers::pi;

namespace {

SpectralKernelModel cosine_sobolev() { return {Basis(BasisKind::Cosine), EigenvalueRule::sobolev(1.0)}; }
SpectralKernelModel fourier_poly(double atom = 0.0) {
  return {Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), atom, Truncation{4096, INFINITY}};
}

}  // namespace

TEST_CASE("cosine-Sobolev K(0,0) matches the brute-force series") {
  // 1 + 2 sum_{k>=1} 1/(1+k^2), summed backwards to k = 10^6, plus the integral tail 2/10^6.
  double s = 0.0;
  for (long k = 1000000; k >= 1; --k) s += 1.0 / (1.0 + double(k) * double(k));
  const double brute = 1.0 + 2.0 * s + 2.0 / 1e6;
  const auto K = cosine_sobolev();
  CHECK(std::abs(K.eval_kernel(0.0, 0.0).real() - brute) < 1e-9);
  CHECK(std::abs(K.eval_kernel(0.0, 0.0).real() - pi / std::tanh(pi)) < 1e-12);
}

TEST_CASE("cosine-Sobolev off-diagonal values match a direct sum") {
  const auto K = cosine_sobolev();
  for (auto [x, y] : {std::pair{0.1, 0.7}, {0.3, 0.3}, {0.0, 1.0}, {0.25, 0.5}}) {
    double s = 1.0;
    for (long k = 200000; k >= 1; --k)
      s += 2.0 * std::cos(pi * k * x) * std::cos(pi * k * y) / (1.0 + double(k) * double(k));
    CHECK(std::abs(K.eval_kernel(x, y).real() - s) < 1e-5);
  }
}

TEST_CASE("rank-one constant kernel") {
  SpectralKernelModel K(Basis(BasisKind::Fourier), EigenvalueRule::list({1.0}));
  CHECK(K.eval_kernel(0.2, 0.9).real() == doctest::Approx(1.0));
  CHECK(K.eval_kernel(0.2, 0.9).imag() == doctest::Approx(0.0));
  CHECK(K.trace() == doctest::Approx(1.0));
}

TEST_CASE("atom-only model") {
  SpectralKernelModel K(Basis(BasisKind::Fourier), EigenvalueRule::list({}), 0.7);
  CHECK(K.eval_kernel(0.4, 0.4).real() == doctest::Approx(0.7));
  CHECK(K.eval_kernel(0.4, 0.5).real() == 0.0);
  CHECK(K.total_trace() == doctest::Approx(0.7));
  CHECK(K.trace() == 0.0);
}

TEST_CASE("atom mass zero is the separable case") {
  const auto K = fourier_poly(0.0);
  CHECK(K.atom_trace() == 0.0);
  CHECK(K.total_trace() == doctest::Approx(pi * pi / 6.0));
}

TEST_CASE("orthonormality by quadrature") {
  for (auto kind : {BasisKind::Fourier, BasisKind::Cosine}) {
    Basis b(kind);
    for (std::size_t j = 1; j <= 7; ++j) {
      for (std::size_t k = j; k <= 7; ++k) {
        const double re = oracle::integrate([&](double x) { return (b.eval(j, x) * std::conj(b.eval(k, x))).real(); });
        const double im = oracle::integrate([&](double x) { return (b.eval(j, x) * std::conj(b.eval(k, x))).imag(); });
        CHECK(std::abs(re - (j == k ? 1.0 : 0.0)) < 1e-10);
        CHECK(std::abs(im) < 1e-10);
      }
    }
  }
}

TEST_CASE("recurrence evaluation matches the definition") {
  for (auto kind : {BasisKind::Fourier, BasisKind::Cosine}) {
    Basis b(kind);
    std::vector<cplx> row(600);
    for (double x : {0.0, 0.123, 0.5, 0.987654}) {
      b.eval_range(x, 3, row);
      for (std::size_t i = 0; i < row.size(); i += 37) CHECK(std::abs(row[i] - oracle::eta(kind, 3 + i, x)) < 1e-10);
    }
  }
}

TEST_CASE("spectral function closed forms agree with grid maximisation") {
  const auto F = fourier_poly();
  const auto C = cosine_sobolev();
  for (std::size_t m : {2, 3, 6, 11}) {
    CHECK(F.spectral_function(m) == doctest::Approx(double(m - 1)));
    CHECK(C.spectral_function(m) == doctest::Approx(double(2 * m - 3)));
    CHECK(spectral_function_grid(C, m, 20001) == doctest::Approx(C.spectral_function(m)).epsilon(1e-9));
    CHECK(tail_function_grid(C, m, 2001) == doctest::Approx(C.tail_function(m)).epsilon(1e-6));
  }
}

TEST_CASE("tail sums") {
  const auto p = EigenvalueRule::polynomial(1.0);
  CHECK(p.total() == doctest::Approx(pi * pi / 6.0).epsilon(1e-12));
  // Brute force for a finite head plus the closed-form total.
  double head = 0.0;
  for (int j = 1; j < 40000; ++j) head += 1.0 / (double(j) * j);
  CHECK(std::abs(p.tail_sum(40000) - (pi * pi / 6.0 - head)) < 1e-12);
  const auto g = EigenvalueRule::geometric(0.5, 2.0);
  CHECK(g.tail_sum(3) == doctest::Approx(2.0 * 0.25 / 0.5));
  const auto l = EigenvalueRule::list({3.0, 2.0, 1.0});
  CHECK(l.tail_sum(2) == doctest::Approx(3.0));
  CHECK(l.tail_sum(5) == 0.0);
  CHECK(*l.rank() == 3);
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS(EigenvalueRule::polynomial(0.4), DomainError);
  CHECK_THROWS_AS(EigenvalueRule::geometric(1.0), DomainError);
  CHECK_THROWS_AS(EigenvalueRule::list({1.0, 2.0}), DomainError);
  const auto C = cosine_sobolev();
  CHECK_THROWS_AS(C.eval_kernel(-0.1, 0.5), DomainError);
  CHECK_THROWS_AS(C.eval_kernel(0.5, 1.1), DomainError);
  CHECK_THROWS_AS(fourier_poly().eval_kernel(1.0, 0.5), DomainError);
  CHECK_THROWS_AS(basis_from_string("legendre"), ConfigError);
}

TEST_CASE("truncation tolerance is enforced") {
  SpectralKernelModel K(Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), 0.0, Truncation{10, 1e-6});
  CHECK_THROWS_AS(K.eval_kernel(0.1, 0.2), TruncationError);
}

TEST_CASE("truncated evaluation stays within its residual") {
  const auto big = SpectralKernelModel(Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0), 0.0,
                                       Truncation{20000, INFINITY});
  const auto small = big.with_truncation({200, INFINITY});
  for (auto [x, y] : {std::pair{0.1, 0.35}, {0.6, 0.61}}) {
    const double diff = std::abs(big.eval_kernel(x, y) - small.eval_kernel(x, y));
    CHECK(diff <= small.kernel_residual(x, y) + 1e-12);
  }
}

TEST_CASE("automatic truncation meets its tolerance or the cap") {
  const auto g = SpectralKernelModel(Basis(BasisKind::Cosine), EigenvalueRule::geometric(0.5));
  const std::size_t N = g.truncation().index;
  CHECK(g.tail_sum(N + 1) <= 1e-10 * g.trace());
  CHECK(g.tail_sum(N) > 1e-10 * g.trace());
  const auto p = SpectralKernelModel(Basis(BasisKind::Fourier), EigenvalueRule::polynomial(1.0));
  CHECK(p.truncation().index == kMaxAutoTruncation);
}

TEST_CASE("embedding and sup norms") {
  const auto C = cosine_sobolev();
  CHECK(C.embedding_norm() == doctest::Approx(1.0));
  CHECK(C.sup_norm_sq() == doctest::Approx(pi / std::tanh(pi)));
  const auto F = fourier_poly(0.3);
  CHECK(F.sup_norm_sq() == doctest::Approx(pi * pi / 6.0 + 0.3).epsilon(1e-6));
}
