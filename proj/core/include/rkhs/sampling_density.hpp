#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "rkhs/rng.hpp"
#include "rkhs/spectral_kernel.hpp"

namespace rkhs {

// plain:         rho = 1
// spectral:      1/2 head(m) + 1/2 (tail(m) with the atom folded in)
// spectral-atom: 1/3 head(m) + 1/3 tail(m) + 1/3 atom
// diagonal:      K(x, x) / tr(K)
// head(m) = (1/(m-1)) sum_{j<m} |eta_j|^2, tail(m) = sum_{j>=m} lambda_j |eta_j|^2 / sum_{j>=m} lambda_j.
// Terms with zero mass are dropped and the remaining weights renormalised.
enum class DensityKind { Plain, Spectral, SpectralAtom, Diagonal };

std::string_view to_string(DensityKind kind) noexcept;
DensityKind density_from_string(std::string_view name);

enum class TermKind { Uniform, Head, Tail, TailWithAtom, Atom, Diagonal };

struct MixtureTerm {
  TermKind kind;
  double weight;
};

struct DensityValue {
  double value = 0.0;
  double residual = 0.0;  // truncation residual of the pointwise evaluation
};

class SamplingDensity {
 public:
  // m is ignored for plain and diagonal densities; otherwise m >= 2 is required.
  SamplingDensity(const SpectralKernelModel& model, DensityKind kind, std::size_t m = 2);

  DensityKind kind() const noexcept { return kind_; }
  std::size_t m() const noexcept { return m_; }
  const SpectralKernelModel& model() const noexcept { return model_; }
  const std::vector<MixtureTerm>& terms() const noexcept { return terms_; }

  double operator()(double x) const { return evaluate(x).value; }
  DensityValue evaluate(double x) const;
  // Per-term component densities at x (without the mixture weights).
  std::vector<double> term_values(double x) const;

  double sample(CounterRng& rng) const;

  // True when the density is identically one (e.g. any mixture over the Fourier basis).
  bool is_uniform() const noexcept { return uniform_; }

 private:
  double component(TermKind kind, double x, double* residual) const;
  std::size_t sample_index(std::size_t first, bool with_atom, CounterRng& rng, bool* atom) const;
  double sample_eigenfunction(std::size_t j, CounterRng& rng) const;

  SpectralKernelModel model_;
  DensityKind kind_;
  std::size_t m_;
  std::vector<MixtureTerm> terms_;
  bool uniform_ = false;
  double tail_mass_ = 0.0;  // sum_{j>=m} lambda_j (or the full trace for the diagonal density)
  // Cumulative table of lambda_j for j in [table_first_, table_first_ + size).
  std::size_t table_first_ = 1;
  std::vector<double> table_;
};

struct NodeSet {
  std::vector<double> nodes;
  std::vector<double> density;  // density value at each node
  DensityKind kind = DensityKind::Plain;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t size() const noexcept { return nodes.size(); }

  // Nodes with density values computed from rho.
  static NodeSet from_points(const SamplingDensity& rho, std::vector<double> points);
};

// n i.i.d. draws from rho on the stream (seed, stream). Exact coincidences are redrawn.
NodeSet draw_nodes(const SamplingDensity& rho, std::size_t n, std::uint64_t seed,
                   std::uint64_t stream = 0);

void write_nodes_csv(std::ostream& os, const NodeSet& X);
NodeSet read_nodes_csv(std::istream& is);

// Inverse of F(y) = y + sin(2 pi y) / (2 pi) on [0, 1], to 1e-12.
double inverse_raised_cosine_cdf(double u);

// The kernel K / sqrt(rho(x) rho(y)) with its spectral quantities, evaluated on a grid.
// Holds references: model and density must outlive the view.
class NormalizedKernel {
 public:
  NormalizedKernel(const SpectralKernelModel& model, const SamplingDensity& rho);

  cplx eval(double x, double y) const;
  // sup_x sum_{j<m} |eta_j(x)|^2 / rho(x)
  double spectral_function(std::size_t m, std::size_t points = 20000) const;
  // sup_x sum_{j>=m} lambda_j |eta_j(x)|^2 / rho(x)
  double tail_function(std::size_t m, std::size_t points = 20000) const;
  // sup_x K0(x, x) / rho(x)
  double atom_diagonal_sup(std::size_t points = 20000) const;
  double density_inf(std::size_t points = 20000) const;

 private:
  const SpectralKernelModel& model_;
  const SamplingDensity& rho_;
};

}  // namespace rkhs
