#include "rkhs/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "rkhs/errors.hpp"
#include "rkhs/leastsq.hpp"
#include "rkhs/worst_case.hpp"

namespace rkhs {

std::string_view to_string(VectorFamily f) noexcept {
  switch (f) {
    case VectorFamily::Kernel: return "kernel";
    case VectorFamily::Sphere: return "sphere";
    case VectorFamily::TwoPoint: return "two-point";
    case VectorFamily::Fixed: return "fixed";
  }
  return "?";
}

VectorFamily family_from_string(std::string_view name) {
  if (name == "kernel") return VectorFamily::Kernel;
  if (name == "sphere") return VectorFamily::Sphere;
  if (name == "two-point") return VectorFamily::TwoPoint;
  if (name == "fixed") return VectorFamily::Fixed;
  throw ConfigError("unknown vector family '" + std::string(name) +
                    "' (expected kernel|sphere|two-point|fixed)");
}

double TailExperiment::almost_sure_bound() const {
  if (family != VectorFamily::Kernel) return radius;
  if (!model) throw PreconditionError("kernel family needs a model");
  // sup_x sum_{k <= N} lambda_k |eta_k(x)|^2, attained at x = 0 for both bases.
  double s = 0.0;
  for (std::size_t k = 1; k <= dimension; ++k) s += model->eigenvalue(k) * model->basis().sup_abs2(k);
  return std::sqrt(s);
}

double TailExperiment::envelope_bound() const {
  return std::isnan(claimed_bound) ? almost_sure_bound() : claimed_bound;
}

Eigen::VectorXd TailExperiment::expectation_diagonal() const {
  const double r2 = radius * radius;
  switch (family) {
    case VectorFamily::Kernel: {
      Eigen::VectorXd d(static_cast<Eigen::Index>(dimension));
      for (std::size_t k = 0; k < dimension; ++k) d(static_cast<Eigen::Index>(k)) = model->eigenvalue(k + 1);
      return d;
    }
    case VectorFamily::Sphere:
      return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dimension), r2 / static_cast<double>(dimension));
    case VectorFamily::TwoPoint:
      return Eigen::VectorXd::Constant(2, r2 / 2.0);
    case VectorFamily::Fixed: {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(1);
      d(0) = r2;
      return d;
    }
  }
  return {};
}

double TailExperiment::expectation_norm() const { return expectation_diagonal().maxCoeff(); }

namespace {

template <class Scalar>
double deviation_from_rows(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& Y,
                           const Eigen::VectorXd& lambda) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat S = (Y.adjoint() * Y) / static_cast<double>(Y.rows());
  S.diagonal() -= lambda.cast<Scalar>();
  S = (0.5 * (S + S.adjoint())).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

void check_norm(double norm_sq, double M) {
  if (norm_sq > M * M * (1.0 + 1e-12)) {
    throw PreconditionError("generated vector norm " + std::to_string(std::sqrt(norm_sq)) +
                            " exceeds the almost-sure bound M = " + std::to_string(M));
  }
}

}  // namespace

Eigen::MatrixXcd sample_vectors(const TailExperiment& exp, std::uint64_t trial) {
  if (exp.n == 0) throw PreconditionError("n must be positive");
  CounterRng rng(exp.seed, trial);
  const double M = exp.envelope_bound();
  const auto n = static_cast<Eigen::Index>(exp.n);
  switch (exp.family) {
    case VectorFamily::Kernel: {
      if (!exp.model) throw PreconditionError("kernel family needs a model");
      if (exp.model->eigenvalue(1) > 1.0 + 1e-15)
        throw PreconditionError("the normalized tail bound needs ||Lambda|| <= 1");
      const std::size_t N = exp.dimension;
      std::vector<double> sig(N);
      for (std::size_t k = 0; k < N; ++k) sig[k] = exp.model->singular_value(k + 1);
      Eigen::MatrixXcd Y(n, static_cast<Eigen::Index>(N));
      std::vector<cplx> row(N);
      for (Eigen::Index i = 0; i < n; ++i) {
        exp.model->basis().eval_range(rng.uniform(), 1, row);
        for (std::size_t k = 0; k < N; ++k) Y(i, static_cast<Eigen::Index>(k)) = sig[k] * row[k];
        check_norm(Y.row(i).squaredNorm(), M);
      }
      return Y;
    }
    case VectorFamily::Sphere: {
      const auto d = static_cast<Eigen::Index>(exp.dimension);
      Eigen::MatrixXcd Y(n, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        double sq = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) {
          const double a = rng.normal(), b = rng.normal();
          Y(i, k) = {a, b};
          sq += a * a + b * b;
        }
        Y.row(i) *= exp.radius / std::sqrt(sq);
        check_norm(Y.row(i).squaredNorm(), M);
      }
      return Y;
    }
    case VectorFamily::TwoPoint: {
      check_norm(exp.radius * exp.radius, M);
      Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, 2);
      for (Eigen::Index i = 0; i < n; ++i) Y(i, rng.uniform() < 0.5 ? 0 : 1) = exp.radius;
      return Y;
    }
    case VectorFamily::Fixed:
      check_norm(exp.radius * exp.radius, M);
      return Eigen::MatrixXcd::Constant(n, 1, exp.radius);
  }
  return {};
}

double deviation_trial(const TailExperiment& exp, std::uint64_t trial) {
  const Eigen::MatrixXcd Y = sample_vectors(exp, trial);
  const Eigen::VectorXd lambda = exp.expectation_diagonal();
  const bool real = exp.family != VectorFamily::Sphere &&
                    !(exp.family == VectorFamily::Kernel && !exp.model->basis().is_real());
  if (real) return deviation_from_rows<double>(Y.real(), lambda);
  return deviation_from_rows<cplx>(Y, lambda);
}

std::vector<double> deviations(const TailExperiment& exp, unsigned threads) {
  std::vector<double> out(exp.trials);
  threads = std::max(1u, threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < exp.trials; ++i) out[i] = deviation_trial(exp, i);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < exp.trials; i += threads) out[i] = deviation_trial(exp, i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double tail_envelope(std::size_t n, double t, double M) {
  const auto nd = static_cast<double>(n);
  return std::pow(2.0, 0.75) * nd * std::exp(-t * t * nd / (21.0 * M * M));
}

double tail_threshold(std::size_t n, double M) {
  const auto nd = static_cast<double>(n);
  return M * std::sqrt(21.0 * std::log(std::pow(2.0, 0.75) * nd) / nd);
}

std::vector<double> t_grid(std::size_t n, double M, std::size_t points, double t_max) {
  const double t0 = tail_threshold(n, M);
  std::vector<double> grid;
  if (t0 >= t_max || points == 0) return grid;
  for (std::size_t i = 1; i <= points; ++i)
    grid.push_back(t0 + (t_max - t0) * static_cast<double>(i) / static_cast<double>(points));
  return grid;
}

Wilson wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {};
  const double T = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / T;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / T;
  const double centre = (p + z2 / (2.0 * T)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / T + z2 / (4.0 * T * T)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double binomial_se(double p, std::size_t trials) {
  p = std::clamp(p, 0.0, 1.0);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

TailPoint empirical_tail(const std::vector<double>& devs, double t, std::size_t n, double M) {
  TailPoint tp;
  tp.t = t;
  const auto hits = static_cast<std::size_t>(std::count_if(devs.begin(), devs.end(), [t](double d) { return d >= t; }));
  tp.rate = devs.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(devs.size());
  tp.interval = wilson_interval(hits, devs.size());
  const double env = tail_envelope(n, t, M);
  tp.bound = std::min(1.0, env);
  tp.vacuous = env >= 1.0;
  tp.pass = tp.vacuous || tp.rate <= tp.bound + 3.0 * binomial_se(tp.bound, devs.size());
  return tp;
}

FEventCheck f_event_check(const std::vector<double>& devs, std::size_t n, double r, double M,
                                   double lambda_norm) {
  FEventCheck pc;
  const auto nd = static_cast<double>(n);
  pc.F = std::max(8.0 * r * std::log(nd) / nd * M * M * kKappa * kKappa, lambda_norm);
  const auto hits = std::count_if(devs.begin(), devs.end(), [&](double d) { return d >= pc.F; });
  pc.rate = devs.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(devs.size());
  pc.bound = std::pow(2.0, 0.75) * std::pow(nd, 1.0 - r);
  pc.pass = pc.bound >= 1.0 || pc.rate <= pc.bound + 3.0 * binomial_se(std::min(pc.bound, 1.0), devs.size());
  return pc;
}

double chernoff_c(double t) { return std::pow(1.0 - t, 1.0 - t) * std::exp(t); }
double chernoff_d(double t) { return std::pow(1.0 + t, 1.0 + t) * std::exp(-t); }

ChernoffReport chernoff_eig_tails(const SpectralKernelModel& model, const SamplingDensity& density,
                                  std::size_t n, std::size_t m, double t, std::size_t trials,
                                  std::uint64_t seed) {
  if (!(t > 0.0 && t < 1.0)) throw PreconditionError("Chernoff tails need 0 < t < 1");
  if (trials == 0) throw PreconditionError("need at least one trial");
  ChernoffReport rep;
  rep.t = t;
  rep.trials = trials;
  rep.c_t = chernoff_c(t);
  rep.d_t = chernoff_d(t);
  rep.spectral_function = density.is_uniform() ? model.spectral_function(m)
                                               : NormalizedKernel(model, density).spectral_function(m);
  const auto nd = static_cast<double>(n), md = static_cast<double>(m);
  rep.envelope_min = md * std::exp(-nd * std::log(rep.c_t) / rep.spectral_function);
  rep.envelope_max = md * std::exp(-nd * std::log(rep.d_t) / rep.spectral_function);
  rep.vacuous_min = rep.envelope_min >= 1.0;
  rep.vacuous_max = rep.envelope_max >= 1.0;
  std::size_t low = 0, high = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const NodeSet X = draw_nodes(density, n, seed, i);
    const DesignSystem ds = assemble_design(model, density, X, m);
    if (!ds.full_rank) {
      ++rep.flagged;
      ++low;
      ++high;
      continue;
    }
    if (ds.lambda_min < 1.0 - t) ++low;
    if (ds.lambda_max > 1.0 + t) ++high;
  }
  rep.rate_min = static_cast<double>(low) / static_cast<double>(trials);
  rep.rate_max = static_cast<double>(high) / static_cast<double>(trials);
  const bool ok_min = rep.vacuous_min ||
                      rep.rate_min <= rep.envelope_min + 3.0 * binomial_se(rep.envelope_min, trials);
  const bool ok_max = rep.vacuous_max ||
                      rep.rate_max <= rep.envelope_max + 3.0 * binomial_se(rep.envelope_max, trials);
  rep.pass = ok_min && ok_max;
  return rep;
}

}  // namespace rkhs
