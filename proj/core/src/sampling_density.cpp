#include "rkhs/sampling_density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "rkhs/errors.hpp"

namespace rkhs {

namespace {
constexpr std::size_t kIndexTable = 4096;
}

std::string_view to_string(DensityKind kind) noexcept {
  switch (kind) {
    case DensityKind::Plain: return "plain";
    case DensityKind::Spectral: return "spectral";
    case DensityKind::SpectralAtom: return "spectral-atom";
    case DensityKind::Diagonal: return "diagonal";
  }
  return "?";
}

DensityKind density_from_string(std::string_view name) {
  if (name == "plain") return DensityKind::Plain;
  if (name == "spectral") return DensityKind::Spectral;
  if (name == "spectral-atom") return DensityKind::SpectralAtom;
  if (name == "diagonal") return DensityKind::Diagonal;
  throw ConfigError("unknown density '" + std::string(name) +
                    "' (expected plain|spectral|spectral-atom|diagonal)");
}

SamplingDensity::SamplingDensity(const SpectralKernelModel& model, DensityKind kind, std::size_t m)
    : model_(model), kind_(kind), m_(m) {
  const double atom = model_.atom_mass();
  const auto rank = model_.eigenvalues().rank();
  const bool spectral = kind_ == DensityKind::Spectral || kind_ == DensityKind::SpectralAtom;
  if (spectral) {
    if (m_ < 2) throw DomainError("spectral densities need m >= 2");
    if (rank && m_ - 1 > *rank) {
      throw DegenerateDensityError("m - 1 exceeds the rank of the kernel; no eigenfunction " +
                                   std::to_string(m_ - 1) + " to sample from");
    }
    tail_mass_ = model_.tail_sum(m_);
    table_first_ = m_;
  } else {
    m_ = 0;
  }

  switch (kind_) {
    case DensityKind::Plain:
      terms_ = {{TermKind::Uniform, 1.0}};
      break;
    case DensityKind::Spectral:
      if (tail_mass_ + atom > 0.0) {
        terms_ = {{TermKind::Head, 0.5}, {TermKind::TailWithAtom, 0.5}};
      } else {
        terms_ = {{TermKind::Head, 1.0}};
      }
      break;
    case DensityKind::SpectralAtom: {
      terms_ = {{TermKind::Head, 1.0}};
      if (tail_mass_ > 0.0) terms_.push_back({TermKind::Tail, 1.0});
      if (atom > 0.0) terms_.push_back({TermKind::Atom, 1.0});
      for (auto& t : terms_) t.weight = 1.0 / static_cast<double>(terms_.size());
      break;
    }
    case DensityKind::Diagonal:
      tail_mass_ = model_.trace();
      table_first_ = 1;
      if (!(tail_mass_ + atom > 0.0)) throw DegenerateDensityError("kernel has zero trace");
      terms_ = {{TermKind::Diagonal, 1.0}};
      break;
  }

  uniform_ = kind_ == DensityKind::Plain || model_.basis().kind() == BasisKind::Fourier;

  if (kind_ != DensityKind::Plain && tail_mass_ > 0.0) {
    std::size_t len = kIndexTable;
    if (rank) len = *rank + 1 - table_first_;
    table_.resize(len);
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      acc += model_.eigenvalue(table_first_ + i);
      table_[i] = acc;
    }
  }
}

double SamplingDensity::component(TermKind kind, double x, double* residual) const {
  const double atom = model_.atom_mass();
  switch (kind) {
    case TermKind::Uniform:
    case TermKind::Atom:
      if (!model_.domain().contains(x)) throw DomainError("point outside the domain");
      return 1.0;
    case TermKind::Head:
      return model_.diagonal_head(x, m_) / static_cast<double>(m_ - 1);
    case TermKind::Tail: {
      const auto t = model_.diagonal_tail(x, m_);
      if (residual) *residual += t.residual / tail_mass_;
      return t.value / tail_mass_;
    }
    case TermKind::TailWithAtom: {
      const auto t = model_.diagonal_tail(x, m_);
      if (residual) *residual += t.residual / (tail_mass_ + atom);
      return (t.value + atom) / (tail_mass_ + atom);
    }
    case TermKind::Diagonal: {
      const auto t = model_.diagonal_tail(x, 1);
      if (residual) *residual += t.residual / (tail_mass_ + atom);
      return (t.value + atom) / (tail_mass_ + atom);
    }
  }
  return 0.0;
}

DensityValue SamplingDensity::evaluate(double x) const {
  DensityValue out;
  if (uniform_) {
    if (!model_.domain().contains(x)) throw DomainError("point outside the domain");
    out.value = 1.0;
    return out;
  }
  for (const auto& t : terms_) {
    double r = 0.0;
    out.value += t.weight * component(t.kind, x, &r);
    out.residual += t.weight * r;
  }
  out.value = std::max(out.value, 0.0);
  return out;
}

std::vector<double> SamplingDensity::term_values(double x) const {
  std::vector<double> v;
  v.reserve(terms_.size());
  for (const auto& t : terms_) v.push_back(component(t.kind, x, nullptr));
  return v;
}

std::size_t SamplingDensity::sample_index(std::size_t first, bool with_atom, CounterRng& rng,
                                          bool* atom) const {
  const double total = tail_mass_ + (with_atom ? model_.atom_mass() : 0.0);
  const double u = rng.uniform() * total;
  *atom = false;
  if (u >= tail_mass_) {
    *atom = true;
    return 0;
  }
  if (!table_.empty() && u < table_.back()) {
    const auto it = std::upper_bound(table_.begin(), table_.end(), u);
    return first + static_cast<std::size_t>(it - table_.begin());
  }
  if (model_.eigenvalues().rank()) return first + table_.size() - 1;  // rounding at the end of a list
  return model_.eigenvalues().sample_index_from(first + table_.size(), rng);
}

double inverse_raised_cosine_cdf(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double lo = 0.0, hi = 1.0, y = u;
  for (int it = 0; it < 200; ++it) {
    const double f = y + std::sin(two_pi * y) / two_pi - u;
    if (f > 0.0) hi = y; else lo = y;
    if (std::abs(f) < 1e-15 || hi - lo < 1e-13) break;
    const double d = 1.0 + std::cos(two_pi * y);
    double next = d > 0.0 ? y - f / d : -1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    y = next;
  }
  return y;
}

double SamplingDensity::sample_eigenfunction(std::size_t j, CounterRng& rng) const {
  if (model_.basis().kind() == BasisKind::Fourier || j == 1) return rng.uniform();
  // |eta_j|^2 = 1 + cos(2 pi k x): pick one of the k periods, then invert within it.
  const auto k = static_cast<std::uint64_t>(j - 1);
  const auto c = rng.below(k);
  const double y = inverse_raised_cosine_cdf(rng.uniform());
  return std::clamp((static_cast<double>(c) + y) / static_cast<double>(k), 0.0, 1.0);
}

double SamplingDensity::sample(CounterRng& rng) const {
  double u = rng.uniform();
  TermKind pick = terms_.back().kind;
  for (const auto& t : terms_) {
    if (u < t.weight) {
      pick = t.kind;
      break;
    }
    u -= t.weight;
  }
  bool atom = false;
  switch (pick) {
    case TermKind::Uniform:
    case TermKind::Atom:
      return rng.uniform();
    case TermKind::Head:
      return sample_eigenfunction(1 + rng.below(m_ - 1), rng);
    case TermKind::Tail: {
      const auto j = sample_index(m_, false, rng, &atom);
      return sample_eigenfunction(j, rng);
    }
    case TermKind::TailWithAtom:
    case TermKind::Diagonal: {
      const auto j = sample_index(table_first_, true, rng, &atom);
      return atom ? rng.uniform() : sample_eigenfunction(j, rng);
    }
  }
  return rng.uniform();
}

NodeSet NodeSet::from_points(const SamplingDensity& rho, std::vector<double> points) {
  NodeSet X;
  X.kind = rho.kind();
  X.nodes = std::move(points);
  X.density.reserve(X.nodes.size());
  for (double x : X.nodes) X.density.push_back(rho(x));
  return X;
}

NodeSet draw_nodes(const SamplingDensity& rho, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  if (n == 0) throw DomainError("need at least one node");
  CounterRng rng(seed, stream);
  NodeSet X;
  X.kind = rho.kind();
  X.seed = seed;
  X.stream = stream;
  X.nodes.resize(n);
  X.density.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    do {
      X.nodes[i] = rho.sample(rng);
      X.density[i] = rho(X.nodes[i]);
    } while (!(X.density[i] > 0.0));
  }
  // Redraw exact coincidences until all nodes are distinct.
  for (;;) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return X.nodes[a] < X.nodes[b] || (X.nodes[a] == X.nodes[b] && a < b);
    });
    bool clean = true;
    for (std::size_t i = 1; i < n; ++i) {
      if (X.nodes[order[i]] == X.nodes[order[i - 1]]) {
        const std::size_t idx = order[i];
        do {
          X.nodes[idx] = rho.sample(rng);
          X.density[idx] = rho(X.nodes[idx]);
        } while (!(X.density[idx] > 0.0));
        clean = false;
      }
    }
    if (clean) break;
  }
  return X;
}

void write_nodes_csv(std::ostream& os, const NodeSet& X) {
  os << "index,x,rho\r\n";
  char buf[96];
  for (std::size_t i = 0; i < X.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\r\n", i, X.nodes[i], X.density[i]);
    os << buf;
  }
}

NodeSet read_nodes_csv(std::istream& is) {
  NodeSet X;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty node file");
  std::size_t expect = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw ConfigError("malformed node row: " + line);
    if (std::stoull(a) != expect++) throw ConfigError("node rows out of order");
    X.nodes.push_back(std::stod(b));
    X.density.push_back(std::stod(c));
  }
  return X;
}

// ---------------------------------------------------------------- NormalizedKernel

NormalizedKernel::NormalizedKernel(const SpectralKernelModel& model, const SamplingDensity& rho)
    : model_(model), rho_(rho) {}

cplx NormalizedKernel::eval(double x, double y) const {
  const double rx = rho_(x), ry = x == y ? rx : rho_(y);
  if (!(rx > 0.0) || !(ry > 0.0)) throw DivisionDomainError("density vanishes at the requested point");
  return model_.eval_kernel(x, y) / std::sqrt(rx * ry);
}

double NormalizedKernel::spectral_function(std::size_t m, std::size_t points) const {
  return grid_maximize(model_.domain(), [&](double x) {
    return model_.diagonal_head(x, m) / rho_(x);
  }, points);
}

double NormalizedKernel::tail_function(std::size_t m, std::size_t points) const {
  return grid_maximize(model_.domain(), [&](double x) {
    return model_.diagonal_tail(x, m).value / rho_(x);
  }, points);
}

double NormalizedKernel::density_inf(std::size_t points) const {
  return -grid_maximize(model_.domain(), [&](double x) { return -rho_(x); }, points);
}

double NormalizedKernel::atom_diagonal_sup(std::size_t points) const {
  if (model_.atom_mass() == 0.0) return 0.0;
  const double inf = density_inf(points);
  if (!(inf > 0.0)) throw DivisionDomainError("density vanishes on the domain");
  return model_.atom_mass() / inf;
}

}  // namespace rkhs
