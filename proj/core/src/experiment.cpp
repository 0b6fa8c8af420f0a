#include "rkhs/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rkhs/errors.hpp"
#include "rkhs/leastsq.hpp"

namespace rkhs {

std::string_view to_string(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::Recover: return "recover";
    case ExperimentKind::Discretize: return "discretize";
    case ExperimentKind::EigCheck: return "eig-check";
    case ExperimentKind::Concentration: return "concentration";
    case ExperimentKind::Sweep: return "sweep";
  }
  return "?";
}

ExperimentKind kind_from_string(std::string_view name) {
  for (auto k : {ExperimentKind::Recover, ExperimentKind::Discretize, ExperimentKind::EigCheck,
                 ExperimentKind::Concentration, ExperimentKind::Sweep})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown experiment kind '" + std::string(name) +
                    "' (expected recover|discretize|eig-check|concentration|sweep)");
}

std::string_view to_string(MRule r) noexcept {
  switch (r) {
    case MRule::Explicit: return "explicit";
    case MRule::Choice: return "choice";
    case MRule::MaxSpectral: return "max-spectral";
  }
  return "?";
}

MRule m_rule_from_string(std::string_view name) {
  if (name == "explicit") return MRule::Explicit;
  if (name == "choice") return MRule::Choice;
  if (name == "max-spectral") return MRule::MaxSpectral;
  throw ConfigError("unknown m rule '" + std::string(name) + "' (expected explicit|choice|max-spectral)");
}

EigenvalueRule KernelSpec::rule() const {
  switch (decay) {
    case DecayKind::Polynomial: return EigenvalueRule::polynomial(s, scale);
    case DecayKind::Sobolev: return EigenvalueRule::sobolev(s, scale);
    case DecayKind::Geometric: return EigenvalueRule::geometric(q, scale);
    case DecayKind::List: return EigenvalueRule::list(values);
  }
  throw ConfigError("bad decay kind");
}

SpectralKernelModel KernelSpec::model(std::size_t N) const {
  if (N == 0) return SpectralKernelModel(Basis(basis), rule(), atom);
  const EigenvalueRule rl = rule();
  return SpectralKernelModel(Basis(basis), rl, atom, Truncation{N, INFINITY});
}

// ------------------------------------------------------------------ config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double parse_double(const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true|false, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"kind", [](auto& c, auto& v) { c.kind = kind_from_string(v); }},
      {"kernel.basis", [](auto& c, auto& v) { c.kernel.basis = basis_from_string(v); }},
      {"kernel.decay", [](auto& c, auto& v) { c.kernel.decay = decay_from_string(v); }},
      {"kernel.s", [](auto& c, auto& v) { c.kernel.s = parse_double(v); }},
      {"kernel.q", [](auto& c, auto& v) { c.kernel.q = parse_double(v); }},
      {"kernel.scale", [](auto& c, auto& v) { c.kernel.scale = parse_double(v); }},
      {"kernel.values", [](auto& c, auto& v) {
         c.kernel.values.clear();
         for (auto& x : split_list(v)) c.kernel.values.push_back(parse_double(x));
       }},
      {"kernel.atom", [](auto& c, auto& v) { c.kernel.atom = parse_double(v); }},
      {"density", [](auto& c, auto& v) { c.density = density_from_string(v); }},
      {"n", [](auto& c, auto& v) { c.n = parse_u64(v); }},
      {"n_grid", [](auto& c, auto& v) {
         c.n_grid.clear();
         for (auto& x : split_list(v)) c.n_grid.push_back(parse_u64(x));
       }},
      {"r", [](auto& c, auto& v) { c.r = parse_double(v); }},
      {"m_rule", [](auto& c, auto& v) { c.m_rule = m_rule_from_string(v); }},
      {"m", [](auto& c, auto& v) { c.m = parse_u64(v); }},
      {"spectral_constant", [](auto& c, auto& v) { c.spectral_constant = parse_double(v); }},
      {"trials", [](auto& c, auto& v) { c.trials = parse_u64(v); }},
      {"seed", [](auto& c, auto& v) { c.seed = parse_u64(v); }},
      {"truncation", [](auto& c, auto& v) { c.truncation = v == "auto" ? 0 : parse_u64(v); }},
      {"bound", [](auto& c, auto& v) {
         if (v == "default") c.bound.reset(); else c.bound = bound_from_string(v);
       }},
      {"weighted", [](auto& c, auto& v) { c.weighted = parse_bool(v); }},
      {"t", [](auto& c, auto& v) { c.t = parse_double(v); }},
      {"family", [](auto& c, auto& v) { c.family = family_from_string(v); }},
      {"dimension", [](auto& c, auto& v) { c.dimension = parse_u64(v); }},
      {"radius", [](auto& c, auto& v) { c.radius = parse_double(v); }},
      {"claimed_bound", [](auto& c, auto& v) { c.claimed_bound = v == "auto" ? NAN : parse_double(v); }},
      {"t_points", [](auto& c, auto& v) { c.t_points = parse_u64(v); }},
      {"expect.baseline_slope", [](auto& c, auto& v) { c.expect_baseline_slope = parse_double(v); }},
      {"expect.baseline_tolerance", [](auto& c, auto& v) { c.expect_baseline_tolerance = parse_double(v); }},
      {"expect.bound_slope_max", [](auto& c, auto& v) { c.expect_bound_slope_max = parse_double(v); }},
      {"output", [](auto& c, auto& v) { c.output = v; }},
  };
  return table;
}

[[noreturn]] void field_error(std::string_view field, const std::string& msg) {
  throw ConfigError(std::string(field) + ": " + msg);
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, std::string_view source) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto where = std::string(source) + ":" + std::to_string(lineno) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + key + ": unknown field");
    if (!seen.insert(key).second) throw ConfigError(where + key + ": duplicate field");
    try {
      it->second(cfg, value);
    } catch (const Error& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  return parse_config(in, path.string());
}

void validate(const ExperimentConfig& c) {
  if (!(c.r > 1.0)) field_error("r", "must be > 1");
  if (c.trials < 1) field_error("trials", "must be >= 1");
  if (c.n < 3) field_error("n", "must be >= 3");
  for (std::size_t i = 0; i < c.n_grid.size(); ++i)
    if (c.n_grid[i] < 3) field_error("n_grid[" + std::to_string(i) + "]", "must be >= 3");
  if (c.kernel.atom < 0.0) field_error("kernel.atom", "must be >= 0");
  if (!(c.kernel.scale > 0.0)) field_error("kernel.scale", "must be > 0");
  if ((c.kernel.decay == DecayKind::Polynomial || c.kernel.decay == DecayKind::Sobolev) && !(2.0 * c.kernel.s > 1.0))
    field_error("kernel.s", "must satisfy 2s > 1");
  if (c.kernel.decay == DecayKind::Geometric && !(c.kernel.q > 0.0 && c.kernel.q < 1.0))
    field_error("kernel.q", "must lie in (0, 1)");
  if (c.m_rule == MRule::Explicit && c.m < 1) field_error("m", "m_rule = explicit needs m >= 1");
  if (!(c.spectral_constant > 0.0)) field_error("spectral_constant", "must be > 0");
  if (c.kind == ExperimentKind::Sweep && c.n_grid.size() < 4)
    field_error("n_grid", "sweep needs at least 4 grid points");
  if (c.kind == ExperimentKind::EigCheck && !(c.t > 0.0 && c.t < 1.0)) field_error("t", "must lie in (0, 1)");
  if (c.kind == ExperimentKind::Discretize) {
    if (c.truncation == 0 || c.truncation > 4000)
      field_error("truncation", "discretize needs an explicit N <= 4000");
    if (c.weighted && c.density != DensityKind::Diagonal)
      field_error("density", "weighted discretization samples from nu; set density = diagonal");
    if (!c.weighted && c.density != DensityKind::Plain)
      field_error("density", "unweighted discretization samples from the base measure; set density = plain");
  }
  if (c.kind == ExperimentKind::Concentration) {
    if (c.t_points < 1) field_error("t_points", "must be >= 1");
    if (c.family != VectorFamily::Kernel && !(c.radius > 0.0)) field_error("radius", "must be > 0");
    if (c.family == VectorFamily::Sphere && c.dimension < 1) field_error("dimension", "sphere needs dimension >= 1");
    if (c.family == VectorFamily::Kernel && c.truncation == 0 && c.dimension == 0)
      field_error("dimension", "kernel family needs dimension or truncation");
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string canonical(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&](std::string_view k, const std::string& v) { os << k << '=' << v << '\n'; };
  auto list = [](const auto& xs, auto fmt) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
    return s;
  };
  kv("kind", std::string(to_string(c.kind)));
  kv("kernel.basis", std::string(to_string(c.kernel.basis)));
  kv("kernel.decay", std::string(to_string(c.kernel.decay)));
  kv("kernel.s", format_double(c.kernel.s));
  kv("kernel.q", format_double(c.kernel.q));
  kv("kernel.scale", format_double(c.kernel.scale));
  kv("kernel.values", list(c.kernel.values, format_double));
  kv("kernel.atom", format_double(c.kernel.atom));
  kv("density", std::string(to_string(c.density)));
  kv("n", std::to_string(c.n));
  kv("n_grid", list(c.n_grid, [](std::size_t x) { return std::to_string(x); }));
  kv("r", format_double(c.r));
  kv("m_rule", std::string(to_string(c.m_rule)));
  kv("m", std::to_string(c.m));
  kv("spectral_constant", format_double(c.spectral_constant));
  kv("trials", std::to_string(c.trials));
  kv("seed", std::to_string(c.seed));
  kv("truncation", std::to_string(c.truncation));
  kv("bound", c.bound ? std::string(to_string(*c.bound)) : "default");
  kv("weighted", c.weighted ? "true" : "false");
  kv("t", format_double(c.t));
  kv("family", std::string(to_string(c.family)));
  kv("dimension", std::to_string(c.dimension));
  kv("radius", format_double(c.radius));
  kv("claimed_bound", format_double(c.claimed_bound));
  kv("t_points", std::to_string(c.t_points));
  kv("expect.baseline_slope", format_double(c.expect_baseline_slope));
  kv("expect.baseline_tolerance", format_double(c.expect_baseline_tolerance));
  kv("expect.bound_slope_max", format_double(c.expect_bound_slope_max));
  return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t resolve_m(const ExperimentConfig& cfg, const SpectralKernelModel& model, std::size_t n) {
  std::size_t m = 0;
  switch (cfg.m_rule) {
    case MRule::Explicit: m = cfg.m; break;
    case MRule::Choice: m = choose_m(n, cfg.r); break;
    case MRule::MaxSpectral: {
      if (cfg.density != DensityKind::Plain && model.basis().kind() != BasisKind::Fourier)
        field_error("m_rule", "max-spectral needs a uniform sampling density");
      m = max_m_spectral([&](std::size_t k) { return model.spectral_function(k); }, n, cfg.r,
                         cfg.spectral_constant);
      break;
    }
  }
  if (m >= n + 1) field_error("m", "needs m - 1 <= n");
  if (auto rank = model.eigenvalues().rank(); rank && m > *rank + 1)
    field_error("m", "m - 1 exceeds the number of eigen-pairs");
  return std::max<std::size_t>(m, 1);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("slope fit needs two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto k = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

void write_csv(std::ostream& os, const Table& t) {
  auto field = [&](const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      os << f;
      return;
    }
    os << '"';
    for (char ch : f) {
      if (ch == '"') os << '"';
      os << ch;
    }
    os << '"';
  };
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) os << ',';
      field(r[i]);
    }
    os << "\r\n";
  };
  line(t.header);
  for (auto& r : t.rows) line(r);
}

bool ExperimentReport::passed() const {
  return std::all_of(predicates.begin(), predicates.end(), [](const Predicate& p) { return p.pass; });
}

// ------------------------------------------------------------------ running

namespace {

using Row = std::vector<std::string>;

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string b01(bool b) { return b ? "1" : "0"; }
std::string u(std::size_t v) { return std::to_string(v); }
std::string d(double v) { return format_double(v); }

double median(std::vector<double> v) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Predicate rate_predicate(std::string name, std::size_t failures, std::size_t trials, double allowed) {
  const double rate = static_cast<double>(failures) / static_cast<double>(trials);
  const double se = binomial_se(std::min(allowed, 1.0), trials);
  Predicate p;
  p.name = std::move(name);
  p.pass = rate <= allowed + 3.0 * se;
  std::ostringstream os;
  os << "rate " << rate << " (" << failures << "/" << trials << ") vs allowed " << allowed << " + 3 SE " << 3.0 * se;
  p.detail = os.str();
  return p;
}

BoundName default_recovery_bound(const ExperimentConfig& cfg) {
  if (cfg.bound) return *cfg.bound;
  if (cfg.kernel.atom > 0.0) return BoundName::Nonseparable;
  return cfg.density == DensityKind::Plain ? BoundName::BoundedKernel : BoundName::Density;
}

BoundInputs recovery_inputs(const SpectralKernelModel& model, const SamplingDensity& rho, std::size_t n,
                            std::size_t m, double r) {
  BoundInputs in = bound_inputs(model, n, m, r);
  if (!rho.is_uniform()) {
    const NormalizedKernel nk(model, rho);
    in.tail_function = nk.tail_function(m);
    in.m0_sq = nk.atom_diagonal_sup();
  }
  return in;
}

void add_bounds(ExperimentReport& rep, const BoundInputs& in, std::initializer_list<BoundName> names) {
  for (auto b : names) {
    try {
      rep.bounds.push_back(bound(b, in));
    } catch (const PreconditionError& e) {
      rep.notes.push_back(std::string(to_string(b)) + " not evaluated: " + e.what());
    }
  }
}

void write_matrix(const std::filesystem::path& p, const MatrixXc& A) {
  std::ofstream os(p, std::ios::binary);
  Table t{{"row", "col", "re", "im"}, {}};
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      t.rows.push_back({u(static_cast<std::size_t>(i)), u(static_cast<std::size_t>(j)), d(A(i, j).real()), d(A(i, j).imag())});
  write_csv(os, t);
}

// Trial-0 debug output. The coefficients are those of f = e_1 + e_m (zero-based columns).
void dump_design(const std::filesystem::path& dir, const SpectralKernelModel& model, const DesignSystem& ds,
                 const NodeSet& X) {
  std::filesystem::create_directories(dir);
  write_matrix(dir / "design.csv", ds.design);
  write_matrix(dir / "gram.csv", ds.gram);
  VectorXc g(static_cast<Eigen::Index>(X.size()));
  for (std::size_t i = 0; i < X.size(); ++i)
    g(static_cast<Eigen::Index>(i)) = model.singular_function(1, X.nodes[i]) + model.singular_function(ds.m, X.nodes[i]);
  const Coefficients c = recover(ds, g);
  write_matrix(dir / "coefficients.csv", c.values);
}

struct RecoveryTrial {
  bool flagged = false;
  double lambda_min = NAN, lambda_max = NAN;
  WceValue wce;
  NullspaceComponent null;
  double combined = NAN;
};

RecoveryTrial recovery_trial(const SpectralKernelModel& model, const SamplingDensity& rho, std::size_t n,
                             std::size_t m, std::uint64_t seed, std::uint64_t stream, double m0_sq,
                             const std::optional<std::filesystem::path>& dump) {
  RecoveryTrial t;
  if (m < 2) {
    // Empty approximation space: the worst case is the largest eigenvalue.
    t.wce.lower = t.wce.upper = model.eigenvalue(1);
    t.combined = t.wce.upper;
    t.null.envelope = 2.0 * m0_sq / static_cast<double>(n);
    return t;
  }
  const NodeSet X = draw_nodes(rho, n, seed, stream);
  const DesignSystem ds = assemble_design(model, rho, X, m);
  if (dump) dump_design(*dump, model, ds, X);
  t.flagged = !ds.full_rank;
  t.lambda_min = ds.lambda_min;
  t.lambda_max = ds.lambda_max;
  t.wce = exact_wce_recovery(model, ds, X, model.truncation().index);
  t.null = wce_nullspace_component(model.atom_mass(), X, ds, m0_sq);
  t.combined = model.atom_mass() > 0.0 ? triangle_combine(t.wce.upper, t.null.value) : t.wce.upper;
  return t;
}

void run_recover(const ExperimentConfig& cfg, const RunOptions& opts, ExperimentReport& rep) {
  const SpectralKernelModel model = cfg.kernel.model(cfg.truncation);
  const std::size_t n = cfg.n;
  const std::size_t m = resolve_m(cfg, model, n);
  const SamplingDensity rho(model, cfg.density, std::max<std::size_t>(m, 2));
  const BoundInputs in = recovery_inputs(model, rho, n, m, cfg.r);
  add_bounds(rep, in, {BoundName::BoundedKernel, BoundName::Density, BoundName::DensityTail, BoundName::Nonseparable,
                       BoundName::NonseparableSplit, BoundName::WawoBaseline});
  const BoundName primary = default_recovery_bound(cfg);
  const BoundReport pb = bound(primary, in);
  const double m0_sq = std::isnan(in.m0_sq) ? model.atom_mass() : in.m0_sq;

  std::vector<RecoveryTrial> res(cfg.trials);
  parallel_for(cfg.trials, opts.threads, [&](std::size_t i) {
    res[i] = recovery_trial(model, rho, n, m, cfg.seed, i, m0_sq, i == 0 ? opts.dump_dir : std::nullopt);
  });

  rep.trials.header = {"trial", "seed", "stream", "n", "m", "N", "flagged", "lambda_min", "lambda_max",
                       "wce_lower", "wce_upper", "nullspace", "nullspace_envelope", "combined",
                       "bound", "bound_value", "exceeds", "within_envelope"};
  std::size_t flagged = 0, exceed = 0, envelope_viol = 0, envelope_checked = 0;
  std::vector<double> errs;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const auto& t = res[i];
    const bool ex = t.flagged || t.combined > pb.value;
    flagged += t.flagged;
    exceed += ex;
    if (t.null.envelope_applies) ++envelope_checked;
    if (!t.null.within_envelope) ++envelope_viol;
    if (!t.flagged) errs.push_back(t.combined);
    rep.trials.rows.push_back({u(i), std::to_string(cfg.seed), u(i), u(n), u(m), u(model.truncation().index),
                               b01(t.flagged), d(t.lambda_min), d(t.lambda_max), d(t.wce.lower), d(t.wce.upper),
                               d(t.null.value), d(t.null.envelope), d(t.combined), std::string(to_string(primary)),
                               d(pb.value), b01(ex), b01(t.null.within_envelope)});
  }
  const double allowed = kEta * std::pow(static_cast<double>(n), 1.0 - cfg.r);
  rep.aggregates = {{"n", double(n)}, {"m", double(m)}, {"N", double(model.truncation().index)},
                    {"flagged", double(flagged)}, {"exceed", double(exceed)},
                    {"failure_rate", double(exceed) / double(cfg.trials)}, {"allowed_rate", allowed},
                    {"bound_value", pb.value}, {"median_wce", median(errs)},
                    {"max_wce", errs.empty() ? NAN : *std::max_element(errs.begin(), errs.end())},
                    {"envelope_checked", double(envelope_checked)}, {"envelope_violations", double(envelope_viol)}};
  rep.predicates.push_back(rate_predicate("failure-rate " + std::string(to_string(primary)), exceed, cfg.trials, allowed));
  if (model.atom_mass() > 0.0)
    rep.predicates.push_back({"nullspace-envelope", envelope_viol == 0,
                              std::to_string(envelope_viol) + " violations in " + std::to_string(envelope_checked) +
                                  " trials with lambda_min >= 1/2"});
}

void run_discretize(const ExperimentConfig& cfg, const RunOptions& opts, ExperimentReport& rep) {
  const SpectralKernelModel model = cfg.kernel.model(cfg.truncation);
  const std::size_t n = cfg.n;
  const SamplingDensity rho(model, cfg.density);
  const BoundInputs in = bound_inputs(model, n, 1, cfg.r);
  add_bounds(rep, in, {BoundName::DiscretizationBounded, BoundName::DiscretizationTrace,
                       BoundName::DiscretizationNonseparable, BoundName::DiscretizationNonseparableTrace});
  BoundName primary;
  if (cfg.bound) primary = *cfg.bound;
  else if (model.atom_mass() > 0.0) primary = cfg.weighted ? BoundName::DiscretizationNonseparableTrace : BoundName::DiscretizationNonseparable;
  else primary = cfg.weighted ? BoundName::DiscretizationTrace : BoundName::DiscretizationBounded;
  const BoundReport pb = bound(primary, in);

  // Sample-size threshold of the bounded-kernel discretization statement.
  const double nd = static_cast<double>(n);
  const double threshold = 21.0 * cfg.r * in.sup_norm_sq / in.id_norm_sq;
  rep.aggregates["n_over_log_n"] = nd / std::log(nd);
  rep.aggregates["n_threshold"] = threshold;
  if (nd / std::log(nd) < threshold) rep.notes.push_back("n / log n is below 21 r ||K||_inf^2 / ||Id||^2");

  std::vector<WceValue> res(cfg.trials);
  parallel_for(cfg.trials, opts.threads, [&](std::size_t i) {
    const NodeSet X = draw_nodes(rho, n, cfg.seed, i);
    res[i] = exact_wce_discretization(model, X, model.truncation().index, cfg.weighted);
  });
  rep.trials.header = {"trial", "seed", "stream", "n", "N", "weighted", "wce_lower", "wce_upper",
                       "bound", "bound_value", "exceeds"};
  std::size_t exceed = 0;
  std::vector<double> errs;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const bool ex = res[i].upper > pb.value;
    exceed += ex;
    errs.push_back(res[i].upper);
    rep.trials.rows.push_back({u(i), std::to_string(cfg.seed), u(i), u(n), u(model.truncation().index),
                               b01(cfg.weighted), d(res[i].lower), d(res[i].upper),
                               std::string(to_string(primary)), d(pb.value), b01(ex)});
  }
  const double allowed = 2.0 * std::pow(nd, 1.0 - cfg.r);
  rep.aggregates.insert({{"n", nd}, {"N", double(model.truncation().index)}, {"exceed", double(exceed)},
                         {"failure_rate", double(exceed) / double(cfg.trials)}, {"allowed_rate", allowed},
                         {"bound_value", pb.value}, {"median_wce", median(errs)},
                         {"max_wce", *std::max_element(errs.begin(), errs.end())}});
  rep.predicates.push_back(rate_predicate("failure-rate " + std::string(to_string(primary)), exceed, cfg.trials, allowed));
}

void run_eig_check(const ExperimentConfig& cfg, const RunOptions& opts, ExperimentReport& rep) {
  const SpectralKernelModel model = cfg.kernel.model(cfg.truncation);
  const std::size_t n = cfg.n;
  const std::size_t m = resolve_m(cfg, model, n);
  if (m < 2) field_error("m", "eig-check needs m >= 2 (the rule gave m = 1)");
  const SamplingDensity rho(model, cfg.density, m);

  struct Res {
    DesignSystem ds;
    EigCheck e;
  };
  std::vector<Res> res(cfg.trials);
  parallel_for(cfg.trials, opts.threads, [&](std::size_t i) {
    const NodeSet X = draw_nodes(rho, n, cfg.seed, i);
    res[i].ds = assemble_design(model, rho, X, m);
    if (i == 0 && opts.dump_dir) dump_design(*opts.dump_dir, model, res[i].ds, X);
    res[i].e = gram_eig_check(res[i].ds);
    res[i].ds.design.resize(0, 0);
    res[i].ds.gram.resize(0, 0);
  });

  rep.trials.header = {"trial", "seed", "stream", "n", "m", "flagged", "lambda_min", "lambda_max",
                       "pinv_norm", "pinv_norm_gram", "lambda_min_ok", "norm_window_ok"};
  std::size_t low = 0, window = 0, cmin = 0, cmax = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const auto& [ds, e] = res[i];
    low += !e.lambda_min_ok;
    window += !e.norm_window_ok;
    cmin += !ds.full_rank || ds.lambda_min < 1.0 - cfg.t;
    cmax += !ds.full_rank || ds.lambda_max > 1.0 + cfg.t;
    rep.trials.rows.push_back({u(i), std::to_string(cfg.seed), u(i), u(n), u(m), b01(!ds.full_rank),
                               d(ds.lambda_min), d(ds.lambda_max), d(e.pinv_norm), d(ds.pinv_norm_from_gram()),
                               b01(e.lambda_min_ok), b01(e.norm_window_ok)});
  }
  const double nd = static_cast<double>(n);
  const double Nm = rho.is_uniform() ? model.spectral_function(m) : NormalizedKernel(model, rho).spectral_function(m);
  const double p1 = std::pow(nd, 1.0 - cfg.r);
  const double env_min = double(m) * std::exp(-nd * std::log(chernoff_c(cfg.t)) / Nm);
  const double env_max = double(m) * std::exp(-nd * std::log(chernoff_d(cfg.t)) / Nm);
  rep.aggregates = {{"n", nd}, {"m", double(m)}, {"spectral_function", Nm},
                    {"spectral_cap", nd / (cfg.spectral_constant * cfg.r * std::log(nd))},
                    {"lambda_min_failures", double(low)}, {"window_failures", double(window)},
                    {"t", cfg.t}, {"c_t", chernoff_c(cfg.t)}, {"d_t", chernoff_d(cfg.t)},
                    {"chernoff_envelope_min", env_min}, {"chernoff_envelope_max", env_max},
                    {"chernoff_rate_min", double(cmin) / double(cfg.trials)},
                    {"chernoff_rate_max", double(cmax) / double(cfg.trials)}};
  rep.predicates.push_back(rate_predicate("lambda-min", low, cfg.trials, p1));
  rep.predicates.push_back(rate_predicate("pinv-norm-window", window, cfg.trials, 2.0 * p1));
  if (env_min < 1.0) rep.predicates.push_back(rate_predicate("chernoff-min", cmin, cfg.trials, env_min));
  else rep.notes.push_back("chernoff lambda_min envelope is vacuous");
  if (env_max < 1.0) rep.predicates.push_back(rate_predicate("chernoff-max", cmax, cfg.trials, env_max));
  else rep.notes.push_back("chernoff lambda_max envelope is vacuous");
}

void run_concentration(const ExperimentConfig& cfg, const RunOptions& opts, ExperimentReport& rep) {
  TailExperiment exp;
  exp.family = cfg.family;
  exp.radius = cfg.radius;
  exp.claimed_bound = cfg.claimed_bound;
  exp.trials = cfg.trials;
  exp.seed = cfg.seed;
  exp.dimension = cfg.family == VectorFamily::TwoPoint ? 2 : cfg.family == VectorFamily::Fixed ? 1 : cfg.dimension;
  if (cfg.family == VectorFamily::Kernel) {
    exp.model = cfg.kernel.model(cfg.truncation ? cfg.truncation : cfg.dimension);
    if (exp.dimension == 0) exp.dimension = exp.model->truncation().index;
  }
  const double M = exp.envelope_bound();
  const double lambda_norm = exp.expectation_norm();
  rep.aggregates = {{"M", M}, {"almost_sure_bound", exp.almost_sure_bound()}, {"lambda_norm", lambda_norm},
                    {"dimension", double(exp.dimension)}};
  const std::vector<std::size_t> grid = cfg.n_grid.empty() ? std::vector<std::size_t>{cfg.n} : cfg.n_grid;

  rep.trials.header = {"n", "trial", "seed", "deviation"};
  Table tail{{"n", "t", "empirical_rate", "wilson_lo", "wilson_hi", "theoretical_bound", "vacuous", "pass"}, {}};
  for (std::size_t n : grid) {
    exp.n = n;
    const std::vector<double> devs = deviations(exp, opts.threads);
    for (std::size_t i = 0; i < devs.size(); ++i)
      rep.trials.rows.push_back({u(n), u(i), std::to_string(cfg.seed), d(devs[i])});
    std::size_t bad = 0;
    const auto ts = t_grid(n, M, cfg.t_points);
    for (double t : ts) {
      const TailPoint tp = empirical_tail(devs, t, n, M);
      bad += !tp.pass;
      tail.rows.push_back({u(n), d(t), d(tp.rate), d(tp.interval.lo), d(tp.interval.hi), d(tp.bound),
                           b01(tp.vacuous), b01(tp.pass)});
    }
    if (ts.empty()) rep.notes.push_back("n = " + u(n) + ": no t <= 1 with a non-vacuous envelope");
    rep.predicates.push_back({"tail n=" + u(n), bad == 0, std::to_string(bad) + " of " + u(ts.size()) + " points above envelope + 3 SE"});
    const FEventCheck pc = f_event_check(devs, n, cfg.r, M, lambda_norm);
    rep.aggregates["F n=" + u(n)] = pc.F;
    rep.aggregates["F_rate n=" + u(n)] = pc.rate;
    rep.aggregates["F_bound n=" + u(n)] = pc.bound;
    rep.predicates.push_back({"F-event n=" + u(n), pc.pass, "rate " + d(pc.rate) + " vs " + d(pc.bound)});
  }
  rep.tables.emplace_back("tail.csv", std::move(tail));
}

void run_sweep(const ExperimentConfig& cfg, const RunOptions& opts, ExperimentReport& rep) {
  const SpectralKernelModel model = cfg.kernel.model(cfg.truncation);
  const BoundName primary = default_recovery_bound(cfg);
  rep.trials.header = {"n", "m", "trial", "seed", "stream", "flagged", "wce_lower", "wce_upper", "nullspace", "combined"};
  Table sweep{{"n", "m", "median_wce", "max_wce", "flagged", "bound", "bound_value", "baseline_value", "baseline_argmin"}, {}};
  std::vector<double> ns, med, bnd, base;
  bool wce_fit = true;
  for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
    const std::size_t n = cfg.n_grid[g];
    const std::size_t m = resolve_m(cfg, model, n);
    const SamplingDensity rho(model, cfg.density, std::max<std::size_t>(m, 2));
    const BoundInputs in = recovery_inputs(model, rho, n, m, cfg.r);
    const BoundReport pb = bound(primary, in);
    const BoundReport bb = bound(BoundName::WawoBaseline, in);
    rep.bounds.push_back(pb);
    rep.bounds.push_back(bb);
    const double m0_sq = std::isnan(in.m0_sq) ? model.atom_mass() : in.m0_sq;
    std::vector<RecoveryTrial> res(cfg.trials);
    const std::uint64_t base_stream = std::uint64_t(g) << 32;
    parallel_for(cfg.trials, opts.threads, [&](std::size_t i) {
      res[i] = recovery_trial(model, rho, n, m, cfg.seed, base_stream + i, m0_sq, std::nullopt);
    });
    std::vector<double> errs;
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < res.size(); ++i) {
      const auto& t = res[i];
      flagged += t.flagged;
      if (!t.flagged) errs.push_back(t.combined);
      rep.trials.rows.push_back({u(n), u(m), u(i), std::to_string(cfg.seed), std::to_string(base_stream + i),
                                 b01(t.flagged), d(t.wce.lower), d(t.wce.upper), d(t.null.value), d(t.combined)});
    }
    const double md = median(errs);
    if (!(md > 0.0) || !std::isfinite(md)) wce_fit = false;
    sweep.rows.push_back({u(n), u(m), d(md), d(errs.empty() ? NAN : *std::max_element(errs.begin(), errs.end())),
                          u(flagged), std::string(to_string(primary)), d(pb.value), d(bb.value), u(bb.argmin)});
    ns.push_back(double(n));
    med.push_back(std::sqrt(md));
    bnd.push_back(std::sqrt(pb.value));
    base.push_back(std::sqrt(bb.value));
  }
  // Slopes of the errors, i.e. square roots of the squared quantities.
  const double s_bound = loglog_slope(ns, bnd);
  const double s_base = loglog_slope(ns, base);
  rep.aggregates = {{"slope_bound", s_bound}, {"slope_baseline", s_base}};
  if (wce_fit) rep.aggregates["slope_median_wce"] = loglog_slope(ns, med);
  if (!std::isnan(cfg.expect_baseline_slope)) {
    const bool ok = std::abs(s_base - cfg.expect_baseline_slope) <= cfg.expect_baseline_tolerance;
    rep.predicates.push_back({"baseline-slope", ok, "fitted " + d(s_base) + ", expected " + d(cfg.expect_baseline_slope) +
                                                        " +/- " + d(cfg.expect_baseline_tolerance)});
  }
  if (!std::isnan(cfg.expect_bound_slope_max)) {
    rep.predicates.push_back({"bound-slope", s_bound <= cfg.expect_bound_slope_max,
                              "fitted " + d(s_bound) + ", required <= " + d(cfg.expect_bound_slope_max)});
  }
  rep.tables.emplace_back("sweep.csv", std::move(sweep));
}

}  // namespace

ExperimentReport run(const ExperimentConfig& cfg, const RunOptions& opts) {
  validate(cfg);
  ExperimentReport rep;
  rep.config = cfg;
  rep.canonical_config = canonical(cfg);
  rep.hash = config_hash(cfg);
  switch (cfg.kind) {
    case ExperimentKind::Recover: run_recover(cfg, opts, rep); break;
    case ExperimentKind::Discretize: run_discretize(cfg, opts, rep); break;
    case ExperimentKind::EigCheck: run_eig_check(cfg, opts, rep); break;
    case ExperimentKind::Concentration: run_concentration(cfg, opts, rep); break;
    case ExperimentKind::Sweep: run_sweep(cfg, opts, rep); break;
  }
  return rep;
}

std::string summary_json(const ExperimentReport& rep) {
  using nlohmann::json;
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(format_double(v)); };
  json j;
  j["version"] = std::string(kVersion);
  j["kind"] = std::string(to_string(rep.config.kind));
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(rep.hash));
  j["config_hash"] = hex;
  j["seed"] = rep.config.seed;
  json cfg = json::object();
  std::istringstream is(rep.canonical_config);
  for (std::string line; std::getline(is, line);) {
    const auto eq = line.find('=');
    cfg[line.substr(0, eq)] = line.substr(eq + 1);
  }
  j["config"] = cfg;
  j["records"] = rep.trials.rows.size();
  json agg = json::object();
  for (auto& [k, v] : rep.aggregates) agg[k] = num(v);
  j["aggregates"] = agg;
  json bounds = json::array();
  for (auto& b : rep.bounds) {
    json jb;
    jb["name"] = std::string(to_string(b.name));
    jb["value"] = num(b.value);
    json in = json::object(), co = json::object();
    for (auto& [k, v] : b.inputs) in[k] = num(v);
    for (auto& [k, v] : b.constants) co[k] = num(v);
    jb["inputs"] = in;
    jb["constants"] = co;
    if (b.name == BoundName::WawoBaseline) jb["argmin"] = b.argmin;
    bounds.push_back(jb);
  }
  j["bounds"] = bounds;
  json preds = json::array();
  for (auto& p : rep.predicates) preds.push_back({{"name", p.name}, {"pass", p.pass}, {"detail", p.detail}});
  j["predicates"] = preds;
  j["notes"] = rep.notes;
  j["passed"] = rep.passed();
  return j.dump(2) + "\n";
}

void write_report(const ExperimentReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "trials.csv", std::ios::binary);
    write_csv(os, rep.trials);
  }
  {
    std::ofstream os(dir / "summary.json", std::ios::binary);
    os << summary_json(rep);
  }
  for (auto& [name, t] : rep.tables) {
    std::ofstream os(dir / name, std::ios::binary);
    write_csv(os, t);
  }
}

}  // namespace rkhs
