#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "amwg/errors.hpp"
#include "amwg/experiment.hpp"
#include "amwg/parallel.hpp"

namespace {

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const amwg::ArgumentError*>(&e)) return "argument";
  if (dynamic_cast<const amwg::UnsupportedError*>(&e)) return "unsupported";
  if (dynamic_cast<const amwg::DivergenceError*>(&e)) return "divergence";
  if (dynamic_cast<const amwg::AccuracyError*>(&e)) return "accuracy";
  if (dynamic_cast<const amwg::ConstructionError*>(&e)) return "construction";
  if (dynamic_cast<const amwg::ContractViolation*>(&e)) return "contract";
  return "runtime";
}

// Single line, tab-free: error<TAB>kind<TAB>message
void report(const std::exception& e) {
  std::string msg = e.what();
  for (char& c : msg) {
    if (c == '\n' || c == '\t') c = ' ';
  }
  std::cerr << "error\t" << error_kind(e) << '\t' << msg << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"a-MwG sampler for initial conditions of locally coupled SDEs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--threads", threads, "Worker threads (1 keeps every command deterministic)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory");

  auto* run = app.add_subcommand("run", "Run the configured chain; writes samples.csv and metrics.json");
  auto* select = app.add_subcommand("select-radius", "Err-alpha / Err-phi table over the configured radii");
  auto* bench = app.add_subcommand("bench-scaling", "Per-sweep time of both samplers over bench_n");
  auto* exact = app.add_subcommand("exact-posterior", "Closed-form posterior of the linear flow model");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << "error\tusage\t" << e.what() << '\n';
    return code;
  }

  try {
    amwg::set_thread_count(threads);
    amwg::ConfigFile file = amwg::ConfigFile::load(config_path);
    if (*seed_opt) file.set("seed", std::to_string(seed));
    const auto cfg = amwg::ExperimentConfig::from_file(file);
    if (run->parsed()) amwg::cmd_run(cfg, out_dir, std::cout);
    if (select->parsed()) amwg::cmd_select_radius(cfg, out_dir, std::cout);
    if (bench->parsed()) amwg::cmd_bench_scaling(cfg, out_dir, std::cout);
    if (exact->parsed()) amwg::cmd_exact_posterior(cfg, out_dir, std::cout);
  } catch (const std::exception& e) {
    report(e);
    return 1;
  }
  return 0;
}
