#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rkhs {

using cplx = std::complex<double>;

class CounterRng;

enum class DomainKind { Torus, UnitInterval };

struct Domain {
  DomainKind kind = DomainKind::Torus;

  // Torus points live in [0, 1), interval points in [0, 1].
  bool contains(double x) const noexcept;
  std::string_view name() const noexcept;
};

enum class BasisKind { Fourier, Cosine };

std::string_view to_string(BasisKind kind) noexcept;
BasisKind basis_from_string(std::string_view name);

// Orthonormal system of L2 with respect to the uniform probability measure.
// Indices start at 1 and index 1 is the constant function.
//   Fourier (torus):    frequencies 0, 1, -1, 2, -2, ...
//   Cosine  (interval): eta_1 = 1, eta_j = sqrt(2) cos(pi (j-1) x)
class Basis {
 public:
  explicit Basis(BasisKind kind = BasisKind::Fourier) noexcept : kind_(kind) {}

  BasisKind kind() const noexcept { return kind_; }
  Domain domain() const noexcept;
  bool is_real() const noexcept { return kind_ == BasisKind::Cosine; }

  // Signed Fourier frequency, or the cosine frequency k = j - 1.
  std::int64_t frequency(std::size_t j) const;
  cplx eval(std::size_t j, double x) const;
  double eval_real(std::size_t j, double x) const;
  double sup_abs2(std::size_t j) const noexcept;

  // out[i] = eta_{first + i}(x). Uses recurrences re-anchored every 128 steps.
  void eval_range(double x, std::size_t first, std::span<cplx> out) const;
  // Cosine basis only.
  void eval_range_real(double x, std::size_t first, std::span<double> out) const;

 private:
  BasisKind kind_;
};

enum class DecayKind { Polynomial, Sobolev, Geometric, List };

std::string_view to_string(DecayKind kind) noexcept;
DecayKind decay_from_string(std::string_view name);

// Non-increasing, summable eigenvalue sequence lambda_1 >= lambda_2 >= ... > 0.
//   polynomial: scale * j^(-2s)               (2s > 1)
//   sobolev:    scale * (1 + (j-1)^2)^(-s)    (2s > 1)
//   geometric:  scale * q^(j-1)               (0 < q < 1)
//   list:       the given values, zero afterwards
class EigenvalueRule {
 public:
  static EigenvalueRule polynomial(double s, double scale = 1.0);
  static EigenvalueRule sobolev(double s, double scale = 1.0);
  static EigenvalueRule geometric(double q, double scale = 1.0);
  static EigenvalueRule list(std::vector<double> values);

  DecayKind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return param_; }
  double scale() const noexcept { return scale_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double operator()(std::size_t j) const;
  std::optional<std::size_t> rank() const noexcept;

  // sum_{j >= m} lambda_j, m >= 1.
  double tail_sum(std::size_t m) const;
  // Bound on the error of tail_sum(m) from the asymptotic expansion.
  double tail_sum_residual(std::size_t m) const;
  double total() const { return tail_sum(1); }

  // sum_{j >= first} lambda_j cos(2 pi (j-1) h) for h in [0, 1], when a closed form exists.
  std::optional<double> cosine_series(std::size_t first, double h) const;

  // Index j >= first drawn with probability lambda_j / tail_sum(first).
  // Exact rejection sampler for the infinite rules; unavailable for lists.
  std::size_t sample_index_from(std::size_t first, CounterRng& rng) const;

  std::string describe() const;

 private:
  EigenvalueRule(DecayKind kind, double param, double scale, std::vector<double> values);
  double raw(double x) const;  // continuous extension used by the tail expansion
  double expansion_tail(std::size_t m, double* residual) const;

  DecayKind kind_;
  double param_;
  double scale_;
  std::vector<double> values_;
  // suffix_[j] = sum_{i >= j} lambda_i for 1 <= j <= table end.
  std::shared_ptr<const std::vector<double>> suffix_;
  double suffix_residual_ = 0.0;
};

struct Truncation {
  std::size_t index = 0;   // eigen-pairs 1..index are kept
  double tolerance = 0.0;  // largest admissible pointwise truncation residual
};

// A value computed from a truncated expansion together with a bound on what was dropped.
struct SeriesValue {
  double value = 0.0;
  double residual = 0.0;
};

inline constexpr std::size_t kMaxAutoTruncation = std::size_t{1} << 16;

// K = K1 + K0 with K1(x, y) = sum_j lambda_j eta_j(x) conj(eta_j(y)) and
// K0(x, y) = atom_mass * [x == y].
class SpectralKernelModel {
 public:
  // Without an explicit truncation, N is the smallest index with
  // tail_sum(N+1) <= 1e-10 * total, capped at kMaxAutoTruncation.
  SpectralKernelModel(Basis basis, EigenvalueRule rule, double atom_mass = 0.0,
                      std::optional<Truncation> truncation = std::nullopt);

  const Basis& basis() const noexcept { return basis_; }
  const EigenvalueRule& eigenvalues() const noexcept { return rule_; }
  Domain domain() const noexcept { return basis_.domain(); }
  double atom_mass() const noexcept { return atom_; }
  const Truncation& truncation() const noexcept { return trunc_; }
  SpectralKernelModel with_truncation(Truncation t) const;

  double eigenvalue(std::size_t j) const { return rule_(j); }
  double singular_value(std::size_t j) const;
  cplx eigenfunction(std::size_t j, double x) const;
  cplx singular_function(std::size_t j, double x) const;

  // Throws TruncationError when the pointwise residual exceeds the tolerance.
  cplx eval_kernel(double x, double y) const;
  double kernel_residual(double x, double y) const;

  // sum_{j >= m} lambda_j |eta_j(x)|^2, without the atom.
  SeriesValue diagonal_tail(double x, std::size_t m) const;
  // sum_{j < m} |eta_j(x)|^2.
  double diagonal_head(double x, std::size_t m) const;

  // sup_x sum_{j<m} |eta_j(x)|^2 (closed form per basis).
  double spectral_function(std::size_t m) const;
  // sup_x sum_{j>=m} lambda_j |eta_j(x)|^2 (closed form per basis).
  double tail_function(std::size_t m) const;
  double tail_sum(std::size_t m) const { return rule_.tail_sum(m); }

  double trace() const { return rule_.total(); }       // tr(K1)
  double atom_trace() const noexcept { return atom_; }  // tr(K0)
  double total_trace() const { return trace() + atom_; }
  double embedding_norm() const;   // ||Id: H(K) -> L2|| = sigma_1
  double sup_norm_sq() const;      // ||K||_inf^2 = sup_x K(x, x)

  std::string describe() const;

 private:
  void check_point(double x) const;

  Basis basis_;
  EigenvalueRule rule_;
  double atom_;
  Truncation trunc_;
};

// sup_x f(x) over a uniform grid of the domain plus golden-section refinement around the best point.
double grid_maximize(const Domain& domain, const std::function<double(double)>& f,
                     std::size_t points);

// Grid maximisation; cross-check for the closed forms.
double spectral_function_grid(const SpectralKernelModel& model, std::size_t m,
                              std::size_t points = 100000);
double tail_function_grid(const SpectralKernelModel& model, std::size_t m,
                          std::size_t points = 100000);

}  // namespace rkhs
