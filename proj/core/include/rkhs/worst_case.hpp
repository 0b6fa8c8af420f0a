#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rkhs/leastsq.hpp"

namespace rkhs {

inline const double kKappa = (1.0 + std::sqrt(5.0)) / 2.0;
inline const double kEta = std::pow(2.0, 0.75) + 1.0;

// Exact worst-case value of a truncated problem. The true value lies in [lower, upper]:
// lower is the exact value of the N-truncated problem, upper adds a rigorous residual bound.
struct WceValue {
  double lower = 0.0;
  double upper = 0.0;
  bool flagged = false;
};

enum class WceMethod { Auto, Dense, Secular };

// sup_{||f||_{H(K1)} <= 1} ||f - S~ f||^2_{L2} for the eigen-pairs 1..N (N capped at the rank).
WceValue exact_wce_recovery(const SpectralKernelModel& model, const DesignSystem& ds,
                            const NodeSet& X, std::size_t N, WceMethod method = WceMethod::Auto);
WceValue exact_wce_recovery(const SpectralKernelModel& model, const SamplingDensity& density,
                            const NodeSet& X, std::size_t m, std::size_t N,
                            WceMethod method = WceMethod::Auto);

// E maps coefficients a (f = sum a_k e_k, ||a|| <= 1) to L2 coefficients of f - S~ f.
struct ErrorMatrix {
  MatrixXc E;
  double residual = 0.0;  // additive bound on sigma_max(E)^2 for the dropped eigen-pairs
  double worst_case() const;
};

ErrorMatrix error_matrix(const SpectralKernelModel& model, const DesignSystem& ds, const NodeSet& X,
                         std::size_t N);

// ||Lambda_N - (1/n) sum_i w_i y^i (y^i)*||, y^i_k = e_k(x^i); w_i = 1 or 1/rho(x^i).
// With an atom the K0 part of the unit ball is included exactly.
WceValue exact_wce_discretization(const SpectralKernelModel& model, const NodeSet& X, std::size_t N,
                                  bool importance_weighted);

struct NullspaceComponent {
  double value = 0.0;     // sup_{||g||_{H(K0)} <= 1} ||S~ g||^2
  double envelope = 0.0;  // 2 M0^2 / n
  double m0_sq = 0.0;
  bool envelope_applies = false;  // lambda_min(H) >= 1/2
  bool within_envelope = true;
};

// m0_sq is sup_x K0(x,x) / rho(x) for the density used to draw X.
NullspaceComponent wce_nullspace_component(double atom_mass, const NodeSet& X, const DesignSystem& ds,
                                           double m0_sq);

// (sqrt(a) + sqrt(b))^2
double triangle_combine(double a, double b);

enum class BoundName {
  BoundedKernel,                   // 5 max{s_m^2, 8 r log n / n T(m) k^2}
  Density,                         // 5 max{s_m^2, 16 r k^2 log n / n sum_{j>=m} s_j^2}
  DensityTail,                     // (15/m) sum_{j >= floor(m/2)} s_j^2
  Nonseparable,                    // 441 max{s_m^2, r log n / n sum_{j>=m} s_j^2, tr0/n}
  NonseparableSplit,               // 7 max{s_m^2, 8 r log n / n T(m) k^2, 8 M0^2 k^2 / n}
  DiscretizationBounded,           // ||Id|| ||K||_inf sqrt(21 r log n / n)
  DiscretizationTrace,             // sqrt(21 tr ||Id||^2 r log n / n)
  DiscretizationNonseparable,      // 8 sqrt(r log n / n) ||K||_inf^2
  DiscretizationNonseparableTrace, // 8 tr sqrt(r log n / n)
  WawoBaseline,                    // min_l {s_l^2 + tr l / n}
};

std::string_view to_string(BoundName name) noexcept;
BoundName bound_from_string(std::string_view name);
const std::vector<BoundName>& all_bounds();

// Missing inputs are NaN; bound() reports which ones a formula needs.
struct BoundInputs {
  double n = NAN;
  double m = NAN;
  double r = NAN;
  double sigma_m_sq = NAN;      // lambda_m
  double tail_function = NAN;   // T(m)
  double tail_sum = NAN;        // sum_{j>=m} lambda_j
  double tail_sum_half = NAN;   // sum_{j>=floor(m/2)} lambda_j
  double trace = NAN;           // tr(K), including the atom
  double atom_trace = NAN;      // tr0(K)
  double id_norm_sq = NAN;      // ||Id||^2 = lambda_1
  double sup_norm_sq = NAN;     // ||K||_inf^2
  double m0_sq = NAN;           // sup K0(x,x)
  std::function<double(std::size_t)> eigenvalue;  // for the baseline scan
};

BoundInputs bound_inputs(const SpectralKernelModel& model, std::size_t n, std::size_t m, double r);

struct BoundReport {
  BoundName name;
  double value = 0.0;
  std::map<std::string, double> inputs;
  std::map<std::string, double> constants;
  std::size_t argmin = 0;  // minimising l for the baseline
};

BoundReport bound(BoundName name, const BoundInputs& in);

}  // namespace rkhs
