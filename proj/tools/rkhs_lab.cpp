#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rkhs/errors.hpp"
#include "rkhs/experiment.hpp"

// Exit codes: 0 all predicates pass, 1 a predicate failed, 2 bad config or usage,
// 3 a precondition of a bound or generator was violated.
int main(int argc, char** argv) {
  CLI::App app{"rkhs-lab: least-squares recovery and discretization experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rkhs::kVersion));

  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
  bool dump = false;
  bool quiet = false;

  for (const char* name : {"recover", "discretize", "eig-check", "concentration", "sweep"}) {
    auto* sub = app.add_subcommand(name, std::string(name) + " experiment");
    sub->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory (default: config 'output')");
    sub->add_flag("--dump", dump, "write design, Gram and coefficient CSVs for trial 0");
    sub->add_flag("-q,--quiet", quiet, "print nothing but errors");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    rkhs::ExperimentConfig cfg = rkhs::load_config(config);
    if (rkhs::to_string(cfg.kind) != sub)
      throw rkhs::ConfigError("kind: config declares '" + std::string(rkhs::to_string(cfg.kind)) +
                              "' but the subcommand is '" + sub + "'");
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.output = out;
    rkhs::validate(cfg);

    rkhs::RunOptions opts;
    opts.threads = threads;
    if (dump) opts.dump_dir = cfg.output / "dump";
    const rkhs::ExperimentReport rep = rkhs::run(cfg, opts);
    rkhs::write_report(rep, cfg.output);
    if (!quiet) {
      for (const auto& p : rep.predicates)
        std::cout << (p.pass ? "PASS " : "FAIL ") << p.name << ": " << p.detail << "\n";
      for (const auto& note : rep.notes) std::cout << "note: " << note << "\n";
      std::cout << "wrote " << (cfg.output / "trials.csv").string() << " and summary.json\n";
    }
    return rep.passed() ? 0 : 1;
  } catch (const rkhs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rkhs::PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 3;
  } catch (const rkhs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
