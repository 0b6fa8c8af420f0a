#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rkhs/errors.hpp"
#include "rkhs/experiment.hpp"

using namespace rkhs;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "t.cfg");
}

std::string error_of(const std::string& text) {
  try {
    validate(parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string csv(const Table& t) {
  std::ostringstream os;
  write_csv(os, t);
  return os.str();
}

const std::string kSmallRecover =
    "kind = recover\nkernel.basis = cosine\nkernel.decay = sobolev\nkernel.s = 1\n"
    "density = spectral\nn = 200\nm_rule = explicit\nm = 6\ntrials = 12\nseed = 9\ntruncation = 256\n";

}  // namespace

TEST_CASE("config errors name the field") {
  CHECK(error_of("kind = recover\nbogus = 1\n").find("t.cfg:2: bogus: unknown field") != std::string::npos);
  CHECK(error_of("n = 5\nn = 6\n").find("t.cfg:2: n: duplicate field") != std::string::npos);
  CHECK(error_of("n = five\n").find("t.cfg:1: n:") != std::string::npos);
  CHECK(error_of("kernel.basis = wavelet\n").find("kernel.basis") != std::string::npos);
  CHECK(error_of("r = 1\n").rfind("r: must be > 1", 0) == 0);
  CHECK(error_of("n_grid = 100, 2\n").find("n_grid[1]") != std::string::npos);
  CHECK(error_of("kind = sweep\nn_grid = 1000\n").find("n_grid") != std::string::npos);
  CHECK(error_of("kind = discretize\ntruncation = 64\ndensity = spectral\n").rfind("density:", 0) == 0);
  CHECK(error_of("no equals sign\n").find("t.cfg:1") != std::string::npos);
  CHECK(error_of(kSmallRecover).empty());
}

TEST_CASE("shipped configs load and validate") {
  for (const auto& entry : fs::directory_iterator(fs::path(RKHS_SOURCE_DIR) / "configs")) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(validate(load_config(entry.path())));
  }
}

TEST_CASE("single-point sweep is a config error") {
  const auto cfg = load_config(fs::path(RKHS_SOURCE_DIR) / "tests/data/single_point_sweep.cfg");
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  CHECK_THROWS_AS(run(cfg), ConfigError);
}

TEST_CASE("config hash") {
  const auto a = parse(kSmallRecover);
  auto b = parse("# same thing, reordered\ntrials = 12\n" + kSmallRecover.substr(0, kSmallRecover.find("trials")) +
                 "seed = 9\ntruncation = 256\noutput = elsewhere\n");
  CHECK(canonical(a) == canonical(b));
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 10;
  CHECK(config_hash(a) != config_hash(b));
  // FNV-1a 64 of the empty string is the offset basis; spot-check the algorithm on the canonical text
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical(a)) h = (h ^ ch) * 0x100000001b3ULL;
  CHECK(config_hash(a) == h);
}

TEST_CASE("CSV quoting") {
  Table t{{"a", "b,c"}, {{"x\"y", "line\nbreak"}, {"1", "2"}}};
  CHECK(csv(t) == "a,\"b,c\"\r\n\"x\"\"y\",\"line\nbreak\"\r\n1,2\r\n");
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(NAN) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("loglog slope") {
  std::vector<double> x, y;
  for (double n : {10.0, 100.0, 1000.0, 1e4}) {
    x.push_back(n);
    y.push_back(3.0 * std::pow(n, -0.37));
  }
  CHECK(loglog_slope(x, y) == doctest::Approx(-0.37));
  CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), PreconditionError);
}

TEST_CASE("m rule resolution") {
  const auto cfg = load_config(fs::path(RKHS_SOURCE_DIR) / "configs/recover_fourier.cfg");
  const auto model = cfg.kernel.model(cfg.truncation);
  CHECK(resolve_m(cfg, model, cfg.n) == 5);
  // Fourier mixtures are uniform, so max-spectral applies; a cosine spectral density is not
  auto ms = cfg;
  ms.m_rule = MRule::MaxSpectral;
  CHECK(resolve_m(ms, model, ms.n) >= 2);
  ms.kernel.basis = BasisKind::Cosine;
  CHECK_THROWS_AS(resolve_m(ms, ms.kernel.model(64), ms.n), ConfigError);
}

TEST_CASE("trials.csv is byte-identical across runs and thread counts") {
  const auto cfg = parse(kSmallRecover);
  const auto a = run(cfg, {1, std::nullopt});
  const auto b = run(cfg, {1, std::nullopt});
  const auto c = run(cfg, {4, std::nullopt});
  CHECK(csv(a.trials) == csv(b.trials));
  CHECK(csv(a.trials) == csv(c.trials));
  CHECK(summary_json(a) == summary_json(c));
  CHECK(a.trials.rows.size() == 12);
}

TEST_CASE("report files") {
  const auto cfg = parse(kSmallRecover);
  const fs::path dir = fs::temp_directory_path() / "rkhs_report_test";
  fs::remove_all(dir);
  const auto rep = run(cfg, {2, dir / "dump"});
  write_report(rep, dir);
  for (auto f : {"trials.csv", "summary.json", "dump/design.csv", "dump/gram.csv", "dump/coefficients.csv"})
    CHECK(fs::exists(dir / f));
  std::ifstream in(dir / "summary.json");
  const std::string js((std::istreambuf_iterator<char>(in)), {});
  CHECK(js.find("\"version\"") != std::string::npos);
  CHECK(js.find("\"config_hash\"") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("baseline slope with a slowly decaying spectrum") {
  // lambda_l = l^-2s gives min_l {l^-2s + tr l / n} ~ n^(-2s/(2s+1)); for s = 0.55 the
  // fitted slope of its square root is about -0.26
  ExperimentConfig cfg = parse(
      "kind = sweep\nkernel.basis = fourier\nkernel.decay = polynomial\nkernel.s = 0.55\ndensity = spectral\n"
      "n_grid = 256, 1024, 4096, 16384\nm_rule = choice\ntrials = 1\ntruncation = 128\n"
      "bound = nonseparable\nexpect.baseline_slope = -0.25\nexpect.baseline_tolerance = 0.05\n");
  validate(cfg);
  // bound and baseline are deterministic; the single trial per point only feeds the wce fit
  const auto rep = run(cfg);
  CHECK(rep.aggregates.at("slope_baseline") == doctest::Approx(-0.25).epsilon(0.2));
  CHECK(rep.passed());
}
