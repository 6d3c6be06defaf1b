#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cohmoment/cli.hpp"

namespace cli = cohmoment::cli;

namespace {

void add_common(CLI::App* sub, cli::Flags& f) {
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--threads", f.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherence-number certification from interference-pattern moments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cohmoment::kVersion));
  cli::Flags f;

  auto* moment = app.add_subcommand("moment", "print Q_n for a state file");
  moment->add_option("--state", f.state, "state JSON file")->required();
  moment->add_option("--mu", f.mu, "distribution centers, comma separated (default all 0)");
  moment->add_option("--sigma", f.sigma, "wrapped-normal width");
  moment->add_option("--n", f.n, "moment order 1..3");
  moment->add_flag("--oracle", f.oracle, "cross-check against Monte Carlo");
  moment->add_option("--samples", f.samples, "Monte Carlo samples (default 1e6)");
  add_common(moment, f);

  auto* certify = app.add_subcommand("certify", "locate the pattern maximum and certify k");
  certify->add_option("--state", f.state, "state JSON file")->required();
  certify->add_option("--sigma", f.sigma, "wrapped-normal width");
  certify->add_option("--n", f.n, "moment order 1..3 (default 2)");
  certify->add_option("--restarts", f.restarts, "ascent restarts (default 20)");
  add_common(certify, f);

  auto* thresholds = app.add_subcommand("thresholds", "emit the coefficient table as CSV (n,k,l,v)");
  thresholds->add_option("--n", f.n, "orders, comma separated (default 1,2,3)");
  thresholds->add_option("--k", f.k, "largest k (default 10)");
  thresholds->add_option("--out", f.out, "output file (default stdout)");

  std::string preset;
  auto* experiment = app.add_subcommand("experiment", "run a preset and write CSV/JSON");
  experiment->add_option("preset", preset, "fig3, fig4, fig5 or table3")->required();
  experiment->add_option("--config", f.config, "key = value config file");
  experiment->add_option("--d", f.d, "dimension");
  experiment->add_option("--k", f.k, "target k (list for fig5/table3)");
  experiment->add_option("--n", f.n, "moment orders");
  experiment->add_option("--sigma", f.sigma, "sigma grid: list or start:stop:step");
  experiment->add_option("--sigma-g", f.sigma_g, "sigma_G grid: list or start:stop:step");
  experiment->add_option("--purity", f.purity, "purity grid (fig5)");
  experiment->add_option("--budget", f.budget, "optimizer restarts (fig5)");
  experiment->add_option("--states", f.states, "ensemble size (table3)");
  experiment->add_option("--samples", f.samples, "deviation draws N_delta");
  experiment->add_option("--restarts", f.restarts, "pattern-maximum restarts (table3)");
  experiment->add_option("--out", f.out, "output directory (default .)");
  add_common(experiment, f);

  std::string scope = "all";
  auto* verify = app.add_subcommand("verify", "run the built-in check suites");
  verify->add_option("scope", scope, "all, moments, thresholds or schur");
  verify->add_option("--samples", f.samples, "Schur simplex samples (default 10000)");
  add_common(verify, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kValidation;
  }

  try {
    if (*moment) return cli::cmd_moment(f, std::cout);
    if (*certify) return cli::cmd_certify(f, std::cout);
    if (*thresholds) return cli::cmd_thresholds(f, std::cout);
    if (*experiment) return cli::cmd_experiment(preset, f, std::cout, std::cerr);
    if (*verify) return cli::cmd_verify(scope, f, std::cout);
  } catch (const cohmoment::StateError& e) {
    std::cerr << "error: invalid state (" << cohmoment::to_string(e.kind()) << "): " << e.what() << '\n';
    return cli::kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kValidation;
  } catch (const cohmoment::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kValidation;
  }
  return cli::kValidation;
}
