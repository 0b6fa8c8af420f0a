#include "rkhs/worst_case.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "rkhs/errors.hpp"

namespace rkhs {

namespace {

constexpr std::size_t kDenseLimit = 256;
constexpr std::size_t kNodeBlock = 64;

// Largest eigenvalue of [[a, b], [b, c]] with b >= 0.
double block_norm(double a, double b, double c) {
  const double mid = 0.5 * (a + c);
  const double half = 0.5 * (a - c);
  return mid + std::sqrt(half * half + b * b);
}

// Upper bound on sup ||E a||^2 when the dropped eigen-pairs couple to the kept ones through
// a part with squared norm at most eps: [[mu, sqrt(mu eps)], [., lambda_next + eps]].
double recovery_upper(double mu, double eps, double lambda_next) {
  if (eps <= 0.0 && lambda_next <= 0.0) return mu;
  return block_norm(mu, std::sqrt(mu * eps), lambda_next + eps);
}

std::size_t effective_n(const SpectralKernelModel& model, std::size_t N) {
  if (auto r = model.eigenvalues().rank()) return std::min(N, *r);
  return N;
}

// Rows eta_{first..first+len-1}(x) for one node, real or complex.
template <class Scalar>
void basis_row(const Basis& basis, double x, std::size_t first, std::span<Scalar> out) {
  if constexpr (std::is_same_v<Scalar, double>) {
    basis.eval_range_real(x, first, out);
  } else {
    basis.eval_range(x, first, out);
  }
}

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
Mat<Scalar> pinv_as(const DesignSystem& ds) {
  const MatrixXc B = ds.pseudo_inverse();
  if constexpr (std::is_same_v<Scalar, double>) {
    return B.real();
  } else {
    return B;
  }
}

// W = B diag(s) Phi_tail diag(sigma_tail), (m-1) x Nt.
template <class Scalar>
Mat<Scalar> tail_coupling(const SpectralKernelModel& model, const DesignSystem& ds, const NodeSet& X,
                          std::size_t N) {
  const std::size_t m = ds.m;
  const std::size_t nt = N + 1 - m;
  const auto rows = static_cast<Eigen::Index>(m - 1);
  Mat<Scalar> BS = pinv_as<Scalar>(ds);
  for (Eigen::Index i = 0; i < BS.cols(); ++i) BS.col(i) *= ds.row_weights(i);
  Mat<Scalar> W = Mat<Scalar>::Zero(rows, static_cast<Eigen::Index>(nt));
  Mat<Scalar> phi(static_cast<Eigen::Index>(kNodeBlock), static_cast<Eigen::Index>(nt));
  std::vector<Scalar> row(nt);
  const std::size_t n = X.size();
  for (std::size_t start = 0; start < n; start += kNodeBlock) {
    const std::size_t b = std::min(kNodeBlock, n - start);
    for (std::size_t i = 0; i < b; ++i) {
      basis_row<Scalar>(model.basis(), X.nodes[start + i], m, row);
      for (std::size_t k = 0; k < nt; ++k) phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
    W.noalias() += BS.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(b)) *
                   phi.topRows(static_cast<Eigen::Index>(b));
  }
  for (std::size_t k = 0; k < nt; ++k) W.col(static_cast<Eigen::Index>(k)) *= model.singular_value(m + k);
  return W;
}

// Largest eigenvalue of D^2 + W* W with D^2 = diag(lam), lam non-increasing:
// the largest mu >= lam_0 with lambda_max(W diag(1/(mu - lam)) W*) = 1, or lam_0.
template <class Scalar>
std::pair<double, double> secular_top(const Mat<Scalar>& W, const std::vector<double>& lam) {
  const double top = lam.front();
  const double fro = W.squaredNorm();
  if (fro == 0.0) return {top, top};
  auto g = [&](double mu) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(lam.size()));
    for (std::size_t k = 0; k < lam.size(); ++k) d(static_cast<Eigen::Index>(k)) = 1.0 / (mu - lam[k]);
    Mat<Scalar> M = W * d.asDiagonal() * W.adjoint();
    M = (0.5 * (M + M.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
  };
  double lo = top, hi = top + fro;
  for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g(mid) > 1.0) lo = mid; else hi = mid;
  }
  return {lo, hi};
}

template <class Scalar>
WceValue wce_recovery_impl(const SpectralKernelModel& model, const DesignSystem& ds, const NodeSet& X,
                           std::size_t N, WceMethod method, double eps, double lambda_next) {
  const std::size_t m = ds.m;
  WceValue out;
  if (N < m) {
    // Every kept eigen-pair is reproduced exactly; only the truncation remains.
    out.lower = 0.0;
    out.upper = recovery_upper(0.0, eps, lambda_next);
    return out;
  }
  double lo = 0.0, hi = 0.0;
  const bool dense = method == WceMethod::Dense || (method == WceMethod::Auto && N <= kDenseLimit);
  if (dense) {
    const auto em = error_matrix(model, ds, X, N);
    lo = hi = em.worst_case();
  } else {
    const Mat<Scalar> W = tail_coupling<Scalar>(model, ds, X, N);
    std::vector<double> lam(N + 1 - m);
    for (std::size_t k = 0; k < lam.size(); ++k) lam[k] = model.eigenvalue(m + k);
    std::tie(lo, hi) = secular_top<Scalar>(W, lam);
  }
  out.lower = lo;
  out.upper = recovery_upper(hi, eps, lambda_next);
  return out;
}

template <class Scalar>
Mat<Scalar> sample_rows(const SpectralKernelModel& model, const NodeSet& X, std::size_t N,
                        const std::vector<double>& scale) {
  Mat<Scalar> Y(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(N));
  std::vector<Scalar> row(N);
  for (std::size_t i = 0; i < X.size(); ++i) {
    basis_row<Scalar>(model.basis(), X.nodes[i], 1, row);
    for (std::size_t k = 0; k < N; ++k)
      Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k] * (model.singular_value(k + 1) * scale[i]);
  }
  return Y;
}

template <class Scalar>
WceValue wce_discretization_impl(const SpectralKernelModel& model, const NodeSet& X, std::size_t N,
                                 const std::vector<double>& w) {
  const std::size_t n = X.size();
  const double atom = model.atom_mass();
  std::vector<double> sw(n);
  for (std::size_t i = 0; i < n; ++i) sw[i] = std::sqrt(w[i]);
  const Mat<Scalar> Y = sample_rows<Scalar>(model, X, N, sw);
  const std::size_t extra = atom > 0.0 ? n : 0;
  const auto dim = static_cast<Eigen::Index>(N + extra);
  Mat<Scalar> Z(static_cast<Eigen::Index>(n), dim);
  Z.leftCols(static_cast<Eigen::Index>(N)) = Y;
  if (extra) {
    Z.rightCols(static_cast<Eigen::Index>(n)).setZero();
    for (std::size_t i = 0; i < n; ++i)
      Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(N + i)) = std::sqrt(atom) * sw[i];
  }
  const double invn = 1.0 / static_cast<double>(n);
  Mat<Scalar> H = (Z.adjoint() * Z) * invn;
  H = (0.5 * (H + H.adjoint())).eval();
  Mat<Scalar> A = -H;
  for (std::size_t k = 0; k < N; ++k) A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) += model.eigenvalue(k + 1);
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> ea(A, Eigen::EigenvaluesOnly);
  const auto& ev = ea.eigenvalues();
  const double a = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eh(H, Eigen::EigenvaluesOnly);
  const double h11 = std::max(0.0, eh.eigenvalues()(eh.eigenvalues().size() - 1));

  const double tail = model.tail_sum(N + 1) + model.eigenvalues().tail_sum_residual(N + 1);
  double tau = 0.0;
  for (std::size_t i = 0; i < n; ++i) tau += w[i];
  tau *= invn * model.basis().sup_abs2(N + 1) * tail;
  const double c = std::max(model.eigenvalue(N + 1), tau);
  WceValue out;
  out.lower = a;
  out.upper = (tau == 0.0 && c == 0.0) ? a : block_norm(a, std::sqrt(h11 * tau), c);
  return out;
}

}  // namespace

double ErrorMatrix::worst_case() const {
  if (E.size() == 0) return 0.0;
  Eigen::BDCSVD<MatrixXc> svd(E);
  const double s = svd.singularValues()(0);
  return s * s;
}

ErrorMatrix error_matrix(const SpectralKernelModel& model, const DesignSystem& ds, const NodeSet& X,
                         std::size_t N) {
  if (!ds.full_rank) throw PreconditionError("error matrix needs a full-rank design");
  N = effective_n(model, N);
  const std::size_t m = ds.m;
  if (N < m - 1) throw PreconditionError("truncation below the approximation space");
  const std::size_t n = X.size();
  const auto NN = static_cast<Eigen::Index>(N);
  MatrixXc G(static_cast<Eigen::Index>(n), NN);
  std::vector<cplx> row(N);
  for (std::size_t i = 0; i < n; ++i) {
    model.basis().eval_range(X.nodes[i], 1, row);
    for (std::size_t k = 0; k < N; ++k)
      G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          row[k] * (model.singular_value(k + 1) * ds.row_weights(static_cast<Eigen::Index>(i)));
  }
  ErrorMatrix em;
  em.E = MatrixXc::Zero(NN, NN);
  for (std::size_t k = 0; k < N; ++k) em.E(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = model.singular_value(k + 1);
  em.E.topRows(static_cast<Eigen::Index>(m - 1)) -= ds.pseudo_inverse() * G;

  double wsum = 0.0;
  for (Eigen::Index i = 0; i < ds.row_weights.size(); ++i) wsum += ds.row_weights(i) * ds.row_weights(i);
  const double tail = model.tail_sum(N + 1) + model.eigenvalues().tail_sum_residual(N + 1);
  const double pn = ds.pinv_norm();
  const double eps = pn * pn * wsum * model.basis().sup_abs2(N + 1) * tail;
  const double mu = em.worst_case();
  em.residual = recovery_upper(mu, eps, model.eigenvalue(N + 1)) - mu;
  return em;
}

WceValue exact_wce_recovery(const SpectralKernelModel& model, const DesignSystem& ds, const NodeSet& X,
                            std::size_t N, WceMethod method) {
  WceValue out;
  if (!ds.full_rank) {
    out.lower = out.upper = INFINITY;
    out.flagged = true;
    return out;
  }
  N = std::max(effective_n(model, N), ds.m - 1);
  double wsum = 0.0;
  for (Eigen::Index i = 0; i < ds.row_weights.size(); ++i) wsum += ds.row_weights(i) * ds.row_weights(i);
  const double tail = model.tail_sum(N + 1) + model.eigenvalues().tail_sum_residual(N + 1);
  const double pn = ds.pinv_norm();
  const double eps = pn * pn * wsum * model.basis().sup_abs2(N + 1) * tail;
  const double next = model.eigenvalue(N + 1);
  if (model.basis().is_real()) return wce_recovery_impl<double>(model, ds, X, N, method, eps, next);
  return wce_recovery_impl<cplx>(model, ds, X, N, method, eps, next);
}

WceValue exact_wce_recovery(const SpectralKernelModel& model, const SamplingDensity& density,
                            const NodeSet& X, std::size_t m, std::size_t N, WceMethod method) {
  return exact_wce_recovery(model, assemble_design(model, density, X, m), X, N, method);
}

WceValue exact_wce_discretization(const SpectralKernelModel& model, const NodeSet& X, std::size_t N,
                                  bool importance_weighted) {
  const std::size_t n = X.size();
  if (n == 0) throw PreconditionError("empty node set");
  N = effective_n(model, N);
  if (model.atom_mass() > 0.0 && N + n > 3000)
    throw PreconditionError("discretization with an atom is dense in N + n; reduce n or N");
  std::vector<double> w(n, 1.0);
  if (importance_weighted) {
    if (X.density.size() != n) throw PreconditionError("weighted discretization needs density values");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(X.density[i] > 0.0)) throw DivisionDomainError("zero density at a node");
      w[i] = 1.0 / X.density[i];
    }
  }
  if (N == 0 && model.atom_mass() == 0.0) return {};
  if (model.basis().is_real()) return wce_discretization_impl<double>(model, X, N, w);
  return wce_discretization_impl<cplx>(model, X, N, w);
}

NullspaceComponent wce_nullspace_component(double atom_mass, const NodeSet& X, const DesignSystem& ds,
                                           double m0_sq) {
  NullspaceComponent out;
  out.m0_sq = m0_sq;
  out.envelope = 2.0 * m0_sq / static_cast<double>(X.size());
  if (atom_mass == 0.0) return out;
  {
    std::vector<double> sorted = X.nodes;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw PreconditionError("coincident nodes: the atom Gram matrix is not diagonal");
  }
  if (!ds.full_rank) {
    out.value = INFINITY;
    out.within_envelope = false;
    return out;
  }
  MatrixXc BS = ds.pseudo_inverse();
  for (Eigen::Index i = 0; i < BS.cols(); ++i) BS.col(i) *= ds.row_weights(i);
  MatrixXc G = BS * BS.adjoint();
  G = (0.5 * (G + G.adjoint())).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(G, Eigen::EigenvaluesOnly);
  out.value = atom_mass * std::max(0.0, es.eigenvalues()(es.eigenvalues().size() - 1));
  out.envelope_applies = ds.lambda_min >= 0.5;
  out.within_envelope = !out.envelope_applies || out.value <= out.envelope + 1e-12;
  return out;
}

double triangle_combine(double a, double b) {
  const double s = std::sqrt(std::max(a, 0.0)) + std::sqrt(std::max(b, 0.0));
  return s * s;
}

// ---------------------------------------------------------------- bounds

std::string_view to_string(BoundName name) noexcept {
  switch (name) {
    case BoundName::BoundedKernel: return "bounded-kernel";
    case BoundName::Density: return "density";
    case BoundName::DensityTail: return "density-tail";
    case BoundName::Nonseparable: return "nonseparable";
    case BoundName::NonseparableSplit: return "nonseparable-split";
    case BoundName::DiscretizationBounded: return "discretization-bounded";
    case BoundName::DiscretizationTrace: return "discretization-trace";
    case BoundName::DiscretizationNonseparable: return "discretization-nonseparable";
    case BoundName::DiscretizationNonseparableTrace: return "discretization-nonseparable-trace";
    case BoundName::WawoBaseline: return "wawo-baseline";
  }
  return "?";
}

const std::vector<BoundName>& all_bounds() {
  static const std::vector<BoundName> names = {
      BoundName::BoundedKernel,         BoundName::Density,
      BoundName::DensityTail,           BoundName::Nonseparable,
      BoundName::NonseparableSplit,     BoundName::DiscretizationBounded,
      BoundName::DiscretizationTrace,   BoundName::DiscretizationNonseparable,
      BoundName::DiscretizationNonseparableTrace, BoundName::WawoBaseline};
  return names;
}

BoundName bound_from_string(std::string_view name) {
  for (auto b : all_bounds())
    if (to_string(b) == name) return b;
  throw ConfigError("unknown bound name '" + std::string(name) + "'");
}

BoundInputs bound_inputs(const SpectralKernelModel& model, std::size_t n, std::size_t m, double r) {
  BoundInputs in;
  in.n = static_cast<double>(n);
  in.m = static_cast<double>(m);
  in.r = r;
  if (m >= 1) {
    in.sigma_m_sq = model.eigenvalue(m);
    in.tail_function = model.tail_function(m);
    in.tail_sum = model.tail_sum(m);
    in.tail_sum_half = model.tail_sum(std::max<std::size_t>(1, m / 2));
  }
  in.trace = model.total_trace();
  in.atom_trace = model.atom_mass();
  in.id_norm_sq = model.eigenvalue(1);
  in.sup_norm_sq = model.sup_norm_sq();
  in.m0_sq = model.atom_mass();
  const EigenvalueRule rule = model.eigenvalues();
  in.eigenvalue = [rule](std::size_t j) { return rule(j); };
  return in;
}

BoundReport bound(BoundName name, const BoundInputs& in) {
  BoundReport rep;
  rep.name = name;
  std::vector<std::string> missing;
  auto need = [&](const char* key, double v) {
    if (std::isnan(v)) missing.emplace_back(key);
    rep.inputs[key] = v;
    return v;
  };
  const double n = need("n", in.n);
  const double r = name == BoundName::WawoBaseline || name == BoundName::DensityTail ? 0.0 : need("r", in.r);
  auto finish = [&]() {
    if (!missing.empty()) {
      std::ostringstream os;
      os << "bound " << to_string(name) << " is missing inputs:";
      for (auto& k : missing) os << " " << k;
      throw PreconditionError(os.str());
    }
    if (n < 3.0 && name != BoundName::WawoBaseline) throw PreconditionError("bounds need n >= 3");
  };
  const double L = std::log(n);
  const double k2 = kKappa * kKappa;
  switch (name) {
    case BoundName::BoundedKernel: {
      const double s = need("sigma_m_sq", in.sigma_m_sq), T = need("tail_function", in.tail_function);
      finish();
      rep.constants = {{"five", 5.0}, {"eight", 8.0}, {"kappa", kKappa}};
      rep.value = 5.0 * std::max(s, 8.0 * r * L / n * T * k2);
      break;
    }
    case BoundName::Density: {
      const double s = need("sigma_m_sq", in.sigma_m_sq), ts = need("tail_sum", in.tail_sum);
      finish();
      rep.constants = {{"five", 5.0}, {"sixteen", 16.0}, {"kappa", kKappa}};
      rep.value = 5.0 * std::max(s, 16.0 * r * k2 * L / n * ts);
      break;
    }
    case BoundName::DensityTail: {
      const double m = need("m", in.m), th = need("tail_sum_half", in.tail_sum_half);
      finish();
      if (m < 2.0) throw PreconditionError("density-tail bound needs m >= 2");
      rep.constants = {{"fifteen", 15.0}};
      rep.value = 15.0 / m * th;
      break;
    }
    case BoundName::Nonseparable: {
      const double s = need("sigma_m_sq", in.sigma_m_sq), ts = need("tail_sum", in.tail_sum);
      const double t0 = need("atom_trace", in.atom_trace);
      finish();
      rep.constants = {{"four_hundred_forty_one", 441.0}};
      rep.value = 441.0 * std::max({s, r * L / n * ts, t0 / n});
      break;
    }
    case BoundName::NonseparableSplit: {
      const double s = need("sigma_m_sq", in.sigma_m_sq), T = need("tail_function", in.tail_function);
      const double m0 = need("m0_sq", in.m0_sq);
      finish();
      rep.constants = {{"seven", 7.0}, {"eight", 8.0}, {"kappa", kKappa}};
      rep.value = 7.0 * std::max({s, 8.0 * r * L / n * T * k2, 8.0 * m0 * k2 / n});
      break;
    }
    case BoundName::DiscretizationBounded: {
      const double id = need("id_norm_sq", in.id_norm_sq), ks = need("sup_norm_sq", in.sup_norm_sq);
      finish();
      rep.constants = {{"twenty_one", 21.0}};
      rep.value = std::sqrt(id) * std::sqrt(ks) * std::sqrt(21.0 * r * L / n);
      break;
    }
    case BoundName::DiscretizationTrace: {
      const double id = need("id_norm_sq", in.id_norm_sq), tr = need("trace", in.trace);
      finish();
      rep.constants = {{"twenty_one", 21.0}};
      rep.value = std::sqrt(21.0 * tr * id * r * L / n);
      break;
    }
    case BoundName::DiscretizationNonseparable: {
      const double ks = need("sup_norm_sq", in.sup_norm_sq);
      finish();
      rep.constants = {{"eight", 8.0}};
      rep.value = 8.0 * std::sqrt(r * L / n) * ks;
      break;
    }
    case BoundName::DiscretizationNonseparableTrace: {
      const double tr = need("trace", in.trace);
      finish();
      rep.constants = {{"eight", 8.0}};
      rep.value = 8.0 * tr * std::sqrt(r * L / n);
      break;
    }
    case BoundName::WawoBaseline: {
      const double tr = need("trace", in.trace);
      if (!in.eigenvalue) missing.emplace_back("eigenvalue");
      finish();
      double best = INFINITY;
      for (std::size_t l = 1;; ++l) {
        const double cost = tr * static_cast<double>(l) / n;
        if (cost >= best) break;
        const double v = in.eigenvalue(l) + cost;
        if (v < best) best = v, rep.argmin = l;
      }
      rep.value = best;
      rep.inputs["argmin"] = static_cast<double>(rep.argmin);
      break;
    }
  }
  return rep;
}

}  // namespace rkhs
