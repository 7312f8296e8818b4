// csc: scenario runner, two-disc example reproductions and audit tools.

#include "csc/app/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace csc::app;
  CLI::App app{"Safety-filtered cascade controller: simulations, examples and audits"};
  app.require_subcommand(1);

  std::string config, out = "out";
  double distance = 0.99;
  Overrides ov;
  double dt = 0, horizon = 0;
  std::uint64_t seed = 0;
  int n_u = 2, n_l = 11, samples = 1000;

  auto add_overrides = [&](CLI::App* c) {
    c->add_option("--dt", dt, "integration step, s");
    c->add_option("--horizon", horizon, "simulated time, s");
    c->add_option("--seed", seed, "seed for sampled checks");
  };

  auto* run = app.add_subcommand("run", "run audits and the closed-loop simulation of a scenario");
  run->add_option("--config", config, "scenario YAML")->required();
  run->add_option("--out", out, "output directory");
  add_overrides(run);

  auto* ex1 = app.add_subcommand("example1", "unreshaped filter between two discs");
  ex1->add_option("--out", out, "output directory");
  ex1->add_option("--distance", distance, "disc radius D, in (0, 1)");

  auto* ex2 = app.add_subcommand("example2", "reshaped filter between two discs");
  ex2->add_option("--out", out, "output directory");
  ex2->add_option("--distance", distance, "disc radius D, in (0, 1)");
  ex2->add_option("--seed", seed, "seed for the containment check");

  auto* audit = app.add_subcommand("audit", "print gain ledger, margins, small-gain and basis checks");
  audit->add_option("--config", config, "scenario YAML")->required();
  add_overrides(audit);

  auto* basis = app.add_subcommand("basis-check", "build and validate a positive basis");
  basis->add_option("--nu", n_u, "control dimension (2 or 3)");
  basis->add_option("--nl", n_l, "number of basis vectors");
  basis->add_option("--samples", samples, "random directions to test (>= 100)");
  basis->add_option("--seed", seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  auto given = [](CLI::App* c, const char* name) { return c->count(name) > 0; };
  for (auto* c : {run, audit}) {
    if (!c->parsed()) continue;
    if (given(c, "--dt")) ov.dt = dt;
    if (given(c, "--horizon")) ov.horizon = horizon;
    if (given(c, "--seed")) ov.seed = seed;
  }

  if (run->parsed()) return cmd_run(config, out, ov, std::cout, std::cerr);
  if (audit->parsed()) return cmd_audit(config, ov, std::cout, std::cerr);
  if (ex1->parsed()) return cmd_example1(out, distance, std::cout, std::cerr);
  if (ex2->parsed()) return cmd_example2(out, distance, given(ex2, "--seed") ? seed : 1, std::cout, std::cerr);
  return cmd_basis_check(n_u, n_l, samples, given(basis, "--seed") ? seed : 7, std::cout, std::cerr);
}
