#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rkhs/sampling_density.hpp"
#include "rkhs/spectral_kernel.hpp"

namespace rkhs {

// kernel:    y_k = e_k(x), x uniform, k <= dimension; Lambda = diag(lambda_k)
// sphere:    uniform on the complex sphere of the given radius in C^dimension; Lambda = radius^2/d I
// two-point: radius * e_1 or radius * e_2 with equal probability; Lambda = radius^2/2 I_2
// fixed:     always radius * e_1; Lambda = radius^2 e_1 e_1*
enum class VectorFamily { Kernel, Sphere, TwoPoint, Fixed };

std::string_view to_string(VectorFamily f) noexcept;
VectorFamily family_from_string(std::string_view name);

struct TailExperiment {
  VectorFamily family = VectorFamily::TwoPoint;
  std::optional<SpectralKernelModel> model;  // kernel family only
  std::size_t dimension = 2;
  double radius = 1.0;
  // Bound M used in the envelope. NaN means the family's true almost-sure bound.
  double claimed_bound = NAN;
  std::size_t n = 100;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;

  double almost_sure_bound() const;  // sup ||y||
  double envelope_bound() const;     // claimed_bound, or almost_sure_bound()
  Eigen::VectorXd expectation_diagonal() const;
  double expectation_norm() const;
};

// The n generated vectors of trial `trial`, one per row.
Eigen::MatrixXcd sample_vectors(const TailExperiment& exp, std::uint64_t trial);
// ||(1/n) sum y y* - Lambda|| for trial index `trial`. Throws PreconditionError when a
// generated vector is longer than the bound used in the envelope.
double deviation_trial(const TailExperiment& exp, std::uint64_t trial);
std::vector<double> deviations(const TailExperiment& exp, unsigned threads = 1);

// 2^(3/4) n exp(-t^2 n / (21 M^2))
double tail_envelope(std::size_t n, double t, double M);
// Smallest t with envelope 1.
double tail_threshold(std::size_t n, double M);
// `points` values of t in (tail_threshold, t_max], evenly spaced.
std::vector<double> t_grid(std::size_t n, double M, std::size_t points, double t_max = 1.0);

struct Wilson {
  double lo = 0.0;
  double hi = 1.0;
};
Wilson wilson_interval(std::size_t successes, std::size_t trials, double z = 2.5758293035489004);

// Standard error of a binomial frequency at probability p.
double binomial_se(double p, std::size_t trials);

struct TailPoint {
  double t = 0.0;
  double rate = 0.0;
  Wilson interval;
  double bound = 1.0;  // min(1, envelope)
  bool vacuous = true;
  bool pass = true;    // rate <= bound + 3 SE, or vacuous
};

TailPoint empirical_tail(const std::vector<double>& devs, double t, std::size_t n, double M);

struct FEventCheck {
  double F = 0.0;  // max{8 r log n M^2 kappa^2 / n, ||Lambda||}
  double rate = 0.0;
  double bound = 0.0;  // 2^(3/4) n^(1-r)
  bool pass = true;
};

FEventCheck f_event_check(const std::vector<double>& devs, std::size_t n, double r, double M,
                                   double lambda_norm);

double chernoff_c(double t);  // (1-t)^(1-t) e^t
double chernoff_d(double t);  // (1+t)^(1+t) e^(-t)

struct ChernoffReport {
  double t = 0.0;
  double c_t = 1.0;
  double d_t = 1.0;
  double spectral_function = 0.0;  // N(m) of the (normalized) system
  double envelope_min = 0.0;       // m exp(-n log c_t / N(m))
  double envelope_max = 0.0;       // m exp(-n log d_t / N(m))
  double rate_min = 0.0;           // P(lambda_min < 1 - t)
  double rate_max = 0.0;           // P(lambda_max > 1 + t)
  bool vacuous_min = true;
  bool vacuous_max = true;
  std::size_t trials = 0;
  std::size_t flagged = 0;
  bool pass = true;
};

ChernoffReport chernoff_eig_tails(const SpectralKernelModel& model, const SamplingDensity& density,
                                  std::size_t n, std::size_t m, double t, std::size_t trials,
                                  std::uint64_t seed);

}  // namespace rkhs
