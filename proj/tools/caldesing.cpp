#include <CLI11.hpp>

#include <iostream>

#include "caldesing/cli.hpp"

namespace cli = caldesing::cli;

int main(int argc, char** argv) {
  CLI::App app{"caldesing: calibrated desingularization laboratory"};
  app.require_subcommand(1);

  std::string config;
  cli::CommandOptions opts;
  std::uint64_t seed = 0;
  double tol = 0.0;

  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "flat key=value config file")->required();
    sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "seed overriding the config");
    sub->add_option("--tol", tol, "tolerance override (see README)");
    return sub;
  };
  CLI::App* verify = add("verify", "build the model and run every calibration check");
  CLI::App* comass = add("comass", "estimate the comass of a form");
  CLI::App* fractal = add("fractal", "generate a Cantor-type set and its box-counting table");
  CLI::App* function = add("function", "build and sample the vanishing function");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kInvalidConfig;
  }
  for (CLI::App* sub : {verify, comass, fractal, function}) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--tol")) opts.tol = tol;
  }

  cli::RunConfig cfg;
  try {
    cfg = cli::RunConfig::load(config);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return cli::kInvalidConfig;
  }
  try {
    if (verify->parsed()) return cli::cmd_verify(cfg, opts).exit_code;
    if (comass->parsed()) return cli::cmd_comass(cfg, opts);
    if (fractal->parsed()) return cli::cmd_fractal(cfg, opts);
    if (function->parsed()) return cli::cmd_function(cfg, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kVerificationFailure;
  }
  return cli::kInvalidConfig;
}
