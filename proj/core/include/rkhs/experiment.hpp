#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rkhs/concentration.hpp"
#include "rkhs/sampling_density.hpp"
#include "rkhs/spectral_kernel.hpp"
#include "rkhs/worst_case.hpp"

namespace rkhs {

inline constexpr std::string_view kVersion = "0.1.0";

enum class ExperimentKind { Recover, Discretize, EigCheck, Concentration, Sweep };

std::string_view to_string(ExperimentKind k) noexcept;
ExperimentKind kind_from_string(std::string_view name);

// explicit:     m as given
// choice:       floor(n / (14 r log n))
// max-spectral: largest m with N(m) <= n / (c r log n), c = spectral_constant
enum class MRule { Explicit, Choice, MaxSpectral };

std::string_view to_string(MRule r) noexcept;
MRule m_rule_from_string(std::string_view name);

struct KernelSpec {
  BasisKind basis = BasisKind::Fourier;
  DecayKind decay = DecayKind::Polynomial;
  double s = 1.0;      // polynomial / sobolev exponent
  double q = 0.5;      // geometric ratio
  double scale = 1.0;
  std::vector<double> values;  // list rule
  double atom = 0.0;

  EigenvalueRule rule() const;
  // N = 0 selects the automatic truncation.
  SpectralKernelModel model(std::size_t N) const;
};

// Plain key = value text, one entry per line, '#' starts a comment. See README for the keys.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Recover;
  KernelSpec kernel;
  DensityKind density = DensityKind::Plain;
  std::size_t n = 1000;
  std::vector<std::size_t> n_grid;  // sweep and concentration
  double r = 2.0;
  MRule m_rule = MRule::Choice;
  std::size_t m = 0;
  double spectral_constant = 7.0;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  std::size_t truncation = 0;  // N; 0 = automatic
  std::optional<BoundName> bound;  // primary bound; default depends on kind and model
  bool weighted = false;           // discretize: 1/nu weights with nu = K(x,x)/tr(K)
  double t = 0.5;                  // eig-check: Chernoff level
  // concentration
  VectorFamily family = VectorFamily::Kernel;
  std::size_t dimension = 0;  // 0: truncation N
  double radius = 1.0;
  double claimed_bound = NAN;
  std::size_t t_points = 10;
  // sweep expectations (NaN disables the predicate)
  double expect_baseline_slope = NAN;
  double expect_baseline_tolerance = 0.05;
  double expect_bound_slope_max = NAN;
  std::filesystem::path output = "out";
};

// Throws ConfigError naming the source, line and field. Semantic checks live in validate().
ExperimentConfig parse_config(std::istream& in, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& cfg);

// Canonical key = value rendering; equal for semantically identical configs.
std::string canonical(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);  // FNV-1a 64 of canonical()

std::size_t resolve_m(const ExperimentConfig& cfg, const SpectralKernelModel& model, std::size_t n);

// Fitted least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC 4180: CRLF line ends, fields quoted when they contain ',', '"', CR or LF.
void write_csv(std::ostream& os, const Table& t);
std::string format_double(double v);  // %.17g, "nan", "inf", "-inf"

struct Predicate {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string canonical_config;
  std::uint64_t hash = 0;
  Table trials;
  std::vector<std::pair<std::string, Table>> tables;  // extra CSV outputs by file name
  std::map<std::string, double> aggregates;
  std::vector<BoundReport> bounds;
  std::vector<std::string> notes;
  std::vector<Predicate> predicates;

  bool passed() const;
};

struct RunOptions {
  unsigned threads = 1;
  // Writes design.csv, gram.csv and coefficients.csv for trial 0 into this directory.
  std::optional<std::filesystem::path> dump_dir;
};

ExperimentReport run(const ExperimentConfig& cfg, const RunOptions& opts = {});

std::string summary_json(const ExperimentReport& report);
// trials.csv, summary.json and the extra tables.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace rkhs
