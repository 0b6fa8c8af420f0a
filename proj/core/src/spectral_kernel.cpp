#include "rkhs/spectral_kernel.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rkhs/errors.hpp"
#include "rkhs/rng.hpp"

namespace rkhs {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kAnchorEvery = 128;
constexpr std::size_t kSuffixTable = 16384;

double frac(double t) { return t - std::floor(t); }

// cos(pi * k * t) for k = k0, k0+1, ... via the Chebyshev recurrence.
void cos_pi_range(double t, std::size_t k0, std::span<double> out) {
  const double c1 = std::cos(kPi * t);
  double prev = 0.0, cur = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t k = k0 + i;
    if (i % kAnchorEvery == 0) {
      const auto kd = static_cast<double>(k);
      cur = std::cos(kPi * std::fmod(kd * t, 2.0));
      prev = k == 0 ? c1 : std::cos(kPi * std::fmod((kd - 1.0) * t, 2.0));
    } else {
      const double next = 2.0 * c1 * cur - prev;
      prev = cur;
      cur = next;
    }
    out[i] = cur;
  }
}

double binom_neg_next(double b, double s, int i) { return b * (-s - i) / (i + 1); }

}  // namespace

// ---------------------------------------------------------------- Domain / Basis

bool Domain::contains(double x) const noexcept {
  if (!std::isfinite(x)) return false;
  return kind == DomainKind::Torus ? (x >= 0.0 && x < 1.0) : (x >= 0.0 && x <= 1.0);
}

std::string_view Domain::name() const noexcept {
  return kind == DomainKind::Torus ? "torus" : "interval";
}

std::string_view to_string(BasisKind kind) noexcept {
  return kind == BasisKind::Fourier ? "fourier" : "cosine";
}

BasisKind basis_from_string(std::string_view name) {
  if (name == "fourier") return BasisKind::Fourier;
  if (name == "cosine") return BasisKind::Cosine;
  throw ConfigError("unknown basis '" + std::string(name) + "' (expected fourier|cosine)");
}

Domain Basis::domain() const noexcept {
  return Domain{kind_ == BasisKind::Fourier ? DomainKind::Torus : DomainKind::UnitInterval};
}

std::int64_t Basis::frequency(std::size_t j) const {
  if (j == 0) throw DomainError("basis index starts at 1");
  if (kind_ == BasisKind::Cosine) return static_cast<std::int64_t>(j - 1);
  const auto f = static_cast<std::int64_t>(j / 2);
  return j % 2 == 0 ? f : -f;
}

cplx Basis::eval(std::size_t j, double x) const {
  if (kind_ == BasisKind::Cosine) return {eval_real(j, x), 0.0};
  const auto f = frequency(j);
  if (f == 0) return {1.0, 0.0};
  return std::polar(1.0, 2.0 * kPi * frac(static_cast<double>(f) * x));
}

double Basis::eval_real(std::size_t j, double x) const {
  if (kind_ != BasisKind::Cosine) throw DomainError("real evaluation needs the cosine basis");
  if (j == 0) throw DomainError("basis index starts at 1");
  if (j == 1) return 1.0;
  const auto k = static_cast<double>(j - 1);
  return std::numbers::sqrt2 * std::cos(kPi * std::fmod(k * x, 2.0));
}

double Basis::sup_abs2(std::size_t j) const noexcept {
  return (kind_ == BasisKind::Cosine && j > 1) ? 2.0 : 1.0;
}

void Basis::eval_range(double x, std::size_t first, std::span<cplx> out) const {
  if (first == 0) throw DomainError("basis index starts at 1");
  if (kind_ == BasisKind::Cosine) {
    std::vector<double> tmp(out.size());
    eval_range_real(x, first, tmp);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {tmp[i], 0.0};
    return;
  }
  const cplx z = std::polar(1.0, 2.0 * kPi * x);
  std::size_t cur = first / 2;  // |frequency| of index first
  cplx p = std::polar(1.0, 2.0 * kPi * frac(static_cast<double>(cur) * x));
  std::size_t steps = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t j = first + i;
    const std::size_t af = j / 2;
    if (af != cur) {
      cur = af;
      if (++steps % kAnchorEvery == 0) {
        p = std::polar(1.0, 2.0 * kPi * frac(static_cast<double>(cur) * x));
      } else {
        p *= z;
      }
    }
    out[i] = (j % 2 == 0 || j == 1) ? p : std::conj(p);
  }
}

void Basis::eval_range_real(double x, std::size_t first, std::span<double> out) const {
  if (kind_ != BasisKind::Cosine) throw DomainError("real evaluation needs the cosine basis");
  if (first == 0) throw DomainError("basis index starts at 1");
  cos_pi_range(x, first - 1, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (first + i == 1) ? 1.0 : std::numbers::sqrt2 * out[i];
  }
}

// ---------------------------------------------------------------- EigenvalueRule

std::string_view to_string(DecayKind kind) noexcept {
  switch (kind) {
    case DecayKind::Polynomial: return "polynomial";
    case DecayKind::Sobolev: return "sobolev";
    case DecayKind::Geometric: return "geometric";
    case DecayKind::List: return "list";
  }
  return "?";
}

DecayKind decay_from_string(std::string_view name) {
  if (name == "polynomial") return DecayKind::Polynomial;
  if (name == "sobolev") return DecayKind::Sobolev;
  if (name == "geometric") return DecayKind::Geometric;
  if (name == "list") return DecayKind::List;
  throw ConfigError("unknown eigenvalue rule '" + std::string(name) +
                    "' (expected polynomial|sobolev|geometric|list)");
}

EigenvalueRule::EigenvalueRule(DecayKind kind, double param, double scale,
                               std::vector<double> values)
    : kind_(kind), param_(param), scale_(scale), values_(std::move(values)) {
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw DomainError("eigenvalue scale must be > 0");
  auto table = std::make_shared<std::vector<double>>();
  switch (kind_) {
    case DecayKind::Polynomial:
    case DecayKind::Sobolev: {
      if (!(2.0 * param_ > 1.0) || !std::isfinite(param_))
        throw DomainError("decay exponent needs 2s > 1 for a summable sequence");
      table->assign(kSuffixTable + 2, 0.0);
      double res = 0.0;
      (*table)[kSuffixTable + 1] = expansion_tail(kSuffixTable + 1, &res);
      for (std::size_t j = kSuffixTable; j >= 1; --j) (*table)[j] = raw(double(j)) + (*table)[j + 1];
      suffix_residual_ = res;
      break;
    }
    case DecayKind::Geometric:
      if (!(param_ > 0.0 && param_ < 1.0)) throw DomainError("geometric ratio must lie in (0, 1)");
      break;
    case DecayKind::List: {
      for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!(values_[i] > 0.0) || !std::isfinite(values_[i]))
          throw DomainError("listed eigenvalues must be positive");
        if (i > 0 && values_[i] > values_[i - 1])
          throw DomainError("listed eigenvalues must be non-increasing");
      }
      table->assign(values_.size() + 2, 0.0);
      for (std::size_t j = values_.size(); j >= 1; --j) (*table)[j] = values_[j - 1] + (*table)[j + 1];
      break;
    }
  }
  suffix_ = std::move(table);
}

EigenvalueRule EigenvalueRule::polynomial(double s, double scale) {
  return EigenvalueRule(DecayKind::Polynomial, s, scale, {});
}
EigenvalueRule EigenvalueRule::sobolev(double s, double scale) {
  return EigenvalueRule(DecayKind::Sobolev, s, scale, {});
}
EigenvalueRule EigenvalueRule::geometric(double q, double scale) {
  return EigenvalueRule(DecayKind::Geometric, q, scale, {});
}
EigenvalueRule EigenvalueRule::list(std::vector<double> values) {
  return EigenvalueRule(DecayKind::List, 0.0, 1.0, std::move(values));
}

double EigenvalueRule::raw(double x) const {
  if (kind_ == DecayKind::Polynomial) return scale_ * std::pow(x, -2.0 * param_);
  const double y = x - 1.0;
  return scale_ * std::pow(1.0 + y * y, -param_);
}

// Euler-Maclaurin: sum_{j>=m} f(j) = int_m^inf f + f(m)/2 - f'(m)/12 + R.
double EigenvalueRule::expansion_tail(std::size_t m, double* residual) const {
  const double a = 2.0 * param_;
  const auto md = static_cast<double>(m);
  double integral = 0.0, deriv = 0.0, third = 0.0;
  if (kind_ == DecayKind::Polynomial) {
    integral = scale_ * std::pow(md, 1.0 - a) / (a - 1.0);
    deriv = -a * scale_ * std::pow(md, -a - 1.0);
    third = a * (a + 1.0) * (a + 2.0) * scale_ * std::pow(md, -a - 3.0);
  } else {
    const double y = md - 1.0;
    if (y < 8.0) throw DomainError("expansion tail needs a large index");
    double b = 1.0, sum = 0.0;
    for (int i = 0; i < 60; ++i) {
      const double term = b * std::pow(y, 1.0 - a - 2.0 * i) / (a + 2.0 * i - 1.0);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      b = binom_neg_next(b, param_, i);
    }
    integral = scale_ * sum;
    deriv = -a * scale_ * y * std::pow(1.0 + y * y, -param_ - 1.0);
    third = a * (a + 1.0) * (a + 2.0) * scale_ * std::pow(y, -a - 3.0);
  }
  const double value = integral + 0.5 * raw(md) - deriv / 12.0;
  if (residual) *residual = third / 360.0 + 4e-16 * value;
  return value;
}

double EigenvalueRule::operator()(std::size_t j) const {
  if (j == 0) throw DomainError("eigenvalue index starts at 1");
  switch (kind_) {
    case DecayKind::Polynomial:
    case DecayKind::Sobolev: return raw(static_cast<double>(j));
    case DecayKind::Geometric: return scale_ * std::pow(param_, static_cast<double>(j - 1));
    case DecayKind::List: return j <= values_.size() ? values_[j - 1] : 0.0;
  }
  return 0.0;
}

std::optional<std::size_t> EigenvalueRule::rank() const noexcept {
  if (kind_ == DecayKind::List) return values_.size();
  return std::nullopt;
}

double EigenvalueRule::tail_sum(std::size_t m) const {
  if (m == 0) throw DomainError("tail index starts at 1");
  switch (kind_) {
    case DecayKind::Geometric:
      return scale_ * std::pow(param_, static_cast<double>(m - 1)) / (1.0 - param_);
    case DecayKind::List:
      return m <= values_.size() ? (*suffix_)[m] : 0.0;
    default:
      if (m <= kSuffixTable + 1) return (*suffix_)[m];
      return expansion_tail(m, nullptr);
  }
}

double EigenvalueRule::tail_sum_residual(std::size_t m) const {
  if (kind_ == DecayKind::Geometric || kind_ == DecayKind::List) return 0.0;
  if (m <= kSuffixTable + 1) return suffix_residual_ + 1e-16 * (*suffix_)[m];
  double r = 0.0;
  expansion_tail(m, &r);
  return r;
}

std::optional<double> EigenvalueRule::cosine_series(std::size_t first, double h) const {
  if (first == 0) throw DomainError("series index starts at 1");
  if (kind_ == DecayKind::Geometric) {
    // sum_{k >= K} q^k e^{i k theta} = q^K e^{i K theta} / (1 - q e^{i theta})
    const double theta = 2.0 * kPi * h;
    const auto K = static_cast<double>(first - 1);
    const cplx num = std::polar(std::pow(param_, K), 2.0 * kPi * frac(K * h));
    const cplx den = 1.0 - param_ * std::polar(1.0, theta);
    return scale_ * (num / den).real();
  }
  if (kind_ == DecayKind::List) {
    double s = 0.0;
    for (std::size_t j = first; j <= values_.size(); ++j)
      s += values_[j - 1] * std::cos(2.0 * kPi * frac(static_cast<double>(j - 1) * h));
    return s;
  }
  if (kind_ == DecayKind::Sobolev && param_ == 1.0) {
    // sum_{k >= 0} cos(2 pi k h) / (1 + k^2) = 1/2 + (pi/2) cosh(pi (1 - 2h)) / sinh(pi), h in [0, 1]
    double full = 0.5 + 0.5 * kPi * std::cosh(kPi * (1.0 - 2.0 * h)) / std::sinh(kPi);
    full *= scale_;
    for (std::size_t j = 1; j < first; ++j)
      full -= raw(double(j)) * std::cos(2.0 * kPi * frac(static_cast<double>(j - 1) * h));
    return full;
  }
  return std::nullopt;
}

std::size_t EigenvalueRule::sample_index_from(std::size_t first, CounterRng& rng) const {
  if (first == 0) throw DomainError("index starts at 1");
  if (kind_ == DecayKind::List) throw DomainError("list rules are sampled from a table");
  if (kind_ == DecayKind::Geometric) {
    const double u = rng.uniform_open();
    const double k = std::floor(std::log(u) / std::log(param_));
    return first + static_cast<std::size_t>(std::min(k, 4.0e18));
  }
  // Peel off leading indices until the Pareto envelope is defined.
  const std::size_t shift = kind_ == DecayKind::Sobolev ? 1 : 0;
  while (first < 2 + shift) {
    if (rng.uniform() * tail_sum(first) < (*this)(first)) return first;
    ++first;
  }
  const double a = 2.0 * param_;
  const double lo = static_cast<double>(first - shift) - 1.0;  // envelope support [lo, inf)
  constexpr double kCap = 4.0e18;
  for (;;) {
    const double y = lo * std::pow(rng.uniform_open(), -1.0 / (a - 1.0));
    if (!(y > lo)) continue;
    if (y >= kCap) return static_cast<std::size_t>(kCap) + shift;
    const double k = std::ceil(y);
    // k^(-a) / int_{k-1}^{k} t^(-a) dt
    const double ratio = (a - 1.0) / (k * std::expm1((1.0 - a) * std::log1p(-1.0 / k)));
    double accept = ratio;
    if (kind_ == DecayKind::Sobolev) accept *= std::pow(1.0 + 1.0 / (k * k), -param_);
    if (rng.uniform() < accept) return static_cast<std::size_t>(k) + shift;
  }
}

std::string EigenvalueRule::describe() const {
  std::ostringstream os;
  os << to_string(kind_);
  if (kind_ == DecayKind::List) {
    os << "[" << values_.size() << "]";
  } else {
    os << "(" << (kind_ == DecayKind::Geometric ? "q=" : "s=") << param_;
    if (scale_ != 1.0) os << ", scale=" << scale_;
    os << ")";
  }
  return os.str();
}

// ---------------------------------------------------------------- SpectralKernelModel

SpectralKernelModel::SpectralKernelModel(Basis basis, EigenvalueRule rule, double atom_mass,
                                         std::optional<Truncation> truncation)
    : basis_(basis), rule_(std::move(rule)), atom_(atom_mass) {
  if (!(atom_ >= 0.0) || !std::isfinite(atom_)) throw DomainError("atom mass must be >= 0");
  const auto rank = rule_.rank();
  if (truncation) {
    if (truncation->index == 0 && rank.value_or(1) > 0)
      throw DomainError("truncation index must be >= 1");
    trunc_ = *truncation;
  } else {
    const double eps = 1e-10 * rule_.total();
    std::size_t hi = 1;
    while (hi < kMaxAutoTruncation && rule_.tail_sum(hi + 1) > eps) hi *= 2;
    hi = std::min(hi, kMaxAutoTruncation);
    std::size_t lo = hi / 2;
    while (lo + 1 < hi) {  // smallest N with tail_sum(N+1) <= eps, within (lo, hi]
      const std::size_t mid = (lo + hi) / 2;
      (rule_.tail_sum(mid + 1) <= eps ? hi : lo) = mid;
    }
    trunc_ = {std::max<std::size_t>(hi, 1), std::max(eps, 1e-300)};
  }
  if (rank) trunc_.index = std::min(trunc_.index, *rank);
}

SpectralKernelModel SpectralKernelModel::with_truncation(Truncation t) const {
  return SpectralKernelModel(basis_, rule_, atom_, t);
}

void SpectralKernelModel::check_point(double x) const {
  if (!domain().contains(x)) {
    std::ostringstream os;
    os << "point " << x << " outside the " << domain().name();
    throw DomainError(os.str());
  }
}

double SpectralKernelModel::singular_value(std::size_t j) const { return std::sqrt(rule_(j)); }


cplx SpectralKernelModel::eigenfunction(std::size_t j, double x) const {
  check_point(x);
  return basis_.eval(j, x);
}

cplx SpectralKernelModel::singular_function(std::size_t j, double x) const {
  return singular_value(j) * eigenfunction(j, x);
}

double SpectralKernelModel::kernel_residual(double x, double y) const {
  const std::size_t N = trunc_.index;
  if (x == y) return diagonal_tail(x, 1).residual;
  if (basis_.kind() == BasisKind::Cosine && rule_.cosine_series(1, 0.0)) return 1e-15 * trace();
  return basis_.sup_abs2(N + 1) * rule_.tail_sum(N + 1);
}

cplx SpectralKernelModel::eval_kernel(double x, double y) const {
  check_point(x);
  check_point(y);
  const double residual = kernel_residual(x, y);
  if (residual > trunc_.tolerance) {
    std::ostringstream os;
    os << "kernel truncation residual " << residual << " exceeds tolerance " << trunc_.tolerance
       << " at N=" << trunc_.index;
    throw TruncationError(os.str());
  }
  if (x == y) return {diagonal_tail(x, 1).value + atom_, 0.0};
  const std::size_t N = trunc_.index;
  if (basis_.kind() == BasisKind::Cosine) {
    const double h1 = std::abs(x - y) / 2.0, h2 = (x + y) / 2.0;
    if (auto c1 = rule_.cosine_series(1, h1)) {
      return {*c1 + *rule_.cosine_series(1, h2) - rule_(1), 0.0};
    }
    std::vector<double> ex(N), ey(N);
    basis_.eval_range_real(x, 1, ex);
    basis_.eval_range_real(y, 1, ey);
    double s = 0.0;
    for (std::size_t j = 1; j <= N; ++j) s += rule_(j) * ex[j - 1] * ey[j - 1];
    return {s, 0.0};
  }
  std::vector<cplx> ex(N), ey(N);
  basis_.eval_range(x, 1, ex);
  basis_.eval_range(y, 1, ey);
  double re = 0.0, im = 0.0;
  for (std::size_t j = 1; j <= N; ++j) {
    const double l = rule_(j);
    const double ar = ex[j - 1].real(), ai = ex[j - 1].imag();
    const double br = ey[j - 1].real(), bi = ey[j - 1].imag();
    re += l * (ar * br + ai * bi);
    im += l * (ai * br - ar * bi);
  }
  return {re, im};
}

SeriesValue SpectralKernelModel::diagonal_tail(double x, std::size_t m) const {
  check_point(x);
  if (m == 0) throw DomainError("tail index starts at 1");
  if (basis_.kind() == BasisKind::Fourier) return {rule_.tail_sum(m), rule_.tail_sum_residual(m)};
  // |eta_j|^2 = 1 + cos(2 pi (j-1) x) for j >= 2.
  const std::size_t f0 = std::max<std::size_t>(m, 2);
  const double lead = m == 1 ? rule_(1) : 0.0;
  const double flat = rule_.tail_sum(f0);
  if (auto osc = rule_.cosine_series(f0, x)) {
    return {lead + flat + *osc, rule_.tail_sum_residual(f0) + 1e-15 * (flat + lead)};
  }
  const std::size_t N = trunc_.index;
  double osc = 0.0;
  if (N >= f0) {
    std::vector<double> c(N - f0 + 1);
    cos_pi_range(2.0 * x, f0 - 1, c);
    for (std::size_t i = 0; i < c.size(); ++i) osc += rule_(f0 + i) * c[i];
  }
  const std::size_t next = std::max(N + 1, f0);
  return {lead + flat + osc, rule_.tail_sum(next) + rule_.tail_sum_residual(f0)};
}

double SpectralKernelModel::diagonal_head(double x, std::size_t m) const {
  check_point(x);
  if (m <= 1) return 0.0;
  if (basis_.kind() == BasisKind::Fourier) return static_cast<double>(m - 1);
  std::vector<double> c(m - 1);
  basis_.eval_range_real(x, 1, c);
  double s = 0.0;
  for (double v : c) s += v * v;
  return s;
}

double SpectralKernelModel::spectral_function(std::size_t m) const {
  if (m <= 1) return 0.0;
  if (basis_.kind() == BasisKind::Fourier) return static_cast<double>(m - 1);
  return 2.0 * static_cast<double>(m) - 3.0;  // attained at x = 0
}

double SpectralKernelModel::tail_function(std::size_t m) const {
  if (m == 0) throw DomainError("tail index starts at 1");
  if (basis_.kind() == BasisKind::Fourier) return rule_.tail_sum(m);
  const double lead = m == 1 ? rule_(1) : 0.0;
  return lead + 2.0 * rule_.tail_sum(std::max<std::size_t>(m, 2));
}

double SpectralKernelModel::embedding_norm() const { return singular_value(1); }

double SpectralKernelModel::sup_norm_sq() const { return tail_function(1) + atom_; }

std::string SpectralKernelModel::describe() const {
  std::ostringstream os;
  os << to_string(basis_.kind()) << "/" << rule_.describe();
  if (atom_ > 0.0) os << "+atom(" << atom_ << ")";
  return os.str();
}

// ---------------------------------------------------------------- grid checks

double grid_maximize(const Domain& dom, const std::function<double(double)>& f, std::size_t points) {
  if (points < 2) points = 2;
  const bool torus = dom.kind == DomainKind::Torus;
  const double step = 1.0 / static_cast<double>(torus ? points : points - 1);
  double best = -INFINITY, bx = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = std::min(static_cast<double>(i) * step, torus ? std::nextafter(1.0, 0.0) : 1.0);
    const double v = f(x);
    if (v > best) best = v, bx = x;
  }
  // Golden-section refinement on the bracketing cell.
  double lo = std::max(0.0, bx - step), hi = std::min(torus ? std::nextafter(1.0, 0.0) : 1.0, bx + step);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
    if (fc > fd) {
      hi = d, d = c, fd = fc, c = hi - g * (hi - lo), fc = f(c);
    } else {
      lo = c, c = d, fc = fd, d = lo + g * (hi - lo), fd = f(d);
    }
  }
  return std::max({best, fc, fd});
}

double spectral_function_grid(const SpectralKernelModel& model, std::size_t m, std::size_t points) {
  return grid_maximize(model.domain(), [&](double x) { return model.diagonal_head(x, m); }, points);
}

double tail_function_grid(const SpectralKernelModel& model, std::size_t m, std::size_t points) {
  return grid_maximize(model.domain(), [&](double x) { return model.diagonal_tail(x, m).value; }, points);
}

}  // namespace rkhs
