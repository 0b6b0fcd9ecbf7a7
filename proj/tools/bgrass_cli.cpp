// bgrass command-line interface: fit, simulate, validate.

#include <CLI11.hpp>

#include <iostream>

#include "bgrass/pipeline.hpp"

namespace {

std::vector<bgrass::Epsilon> parse_grid(const std::vector<std::string>& values) {
  std::vector<bgrass::Epsilon> grid;
  for (const auto& v : values) grid.push_back(bgrass::Epsilon::parse(v));
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian graph-regularized signal detection for spontaneous AE reports"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  bool allow_nonconverged = false, quiet = false;
  int threads = 0;
  auto* fit = app.add_subcommand("fit", "Fit the model to a report file");
  fit->add_option("--config", config_path, "JSON run configuration")->required();
  fit->add_option("--out", out_dir, "Output directory (overrides the config)");
  fit->add_option("--threads", threads, "Worker threads (0 = all cores)");
  fit->add_flag("--allow-nonconverged", allow_nonconverged, "Exit 0 even if R_c exceeds the threshold");
  fit->add_flag("--quiet", quiet, "Suppress progress output");

  auto* validate = app.add_subcommand("validate", "Parse inputs and report stratification and conditioning");
  validate->add_option("--config", config_path, "JSON run configuration")->required();

  bgrass::SimulateOptions sim;
  std::vector<std::string> grid;
  std::string bgrass_eps, eps_true;
  auto* simulate = app.add_subcommand("simulate", "Run the simulation designs and write metrics");
  simulate->add_option("--design", sim.design, "sim1 or sim2")->check(CLI::IsMember({"sim1", "sim2"}));
  simulate->add_option("--replicates", sim.replicates, "Number of replicates")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Base seed");
  simulate->add_option("--reports", sim.sim1.num_reports, "Reports per replicate (sim1)");
  simulate->add_option("--sim2-reports", sim.sim2.num_reports, "Reports per replicate (sim2)");
  simulate->add_option("--num-aes", sim.sim2_num_aes, "Number of AEs (sim2)");
  simulate->add_option("--num-groups", sim.sim2_num_groups, "Number of ontology groups (sim2)");
  simulate->add_option("--signal-fraction", sim.sim2.signal_fraction, "Prior inclusion of true signals (sim2)");
  simulate->add_option("--eps-true", eps_true, "Generating epsilon (sim2)");
  simulate->add_option("--iterations", sim.schedule.iterations, "Gibbs iterations per chain");
  simulate->add_option("--burn-in", sim.schedule.burn_in, "Burn-in iterations");
  simulate->add_option("--thin", sim.schedule.thin, "Thinning interval");
  simulate->add_option("--chains", sim.chains, "Chains per fit");
  simulate->add_option("--grid", grid, "Epsilon grid (numbers or inf)");
  simulate->add_option("--epsilon", bgrass_eps, "Fit BGrass at this epsilon instead of the DIC choice");
  simulate->add_option("--fdr-alpha", sim.fdr_alpha, "Bayesian FDR level");
  simulate->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");
  simulate->add_option("--out", sim.output_dir, "Output directory")->required();
  simulate->add_flag("--export-data", sim.export_data, "Write each replicate's reports, ontology and truth");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      auto config = bgrass::load_config(config_path);
      if (!out_dir.empty()) config.output_dir = out_dir;
      if (threads > 0) config.threads = threads;
      bgrass::FitOptions options;
      options.allow_nonconverged = allow_nonconverged;
      options.progress = quiet ? nullptr : &std::cerr;
      const auto result = bgrass::cmd_fit(config, options);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "model " << result.model << ", epsilon " << result.epsilon.to_string() << ", max R_c "
                << result.max_rhat << '\n'
                << "results written to " << result.run_dir << '\n';
      if (!result.converged) {
        std::cerr << "max R_c " << result.max_rhat << " >= " << config.rhat_threshold
                  << (allow_nonconverged ? " (continuing: --allow-nonconverged)" : "; chains have not converged")
                  << '\n';
      }
      return result.exit_code;
    }
    if (validate->parsed()) {
      const auto config = bgrass::load_config(config_path);
      bgrass::print_validate_report(std::cout, bgrass::cmd_validate(config));
      return 0;
    }
    if (simulate->parsed()) {
      if (!grid.empty()) sim.epsilon_grid = parse_grid(grid);
      if (!eps_true.empty()) sim.sim2.eps_true = bgrass::Epsilon::parse(eps_true);
      if (!bgrass_eps.empty()) sim.bgrass_epsilon = bgrass::Epsilon::parse(bgrass_eps);
      sim.schedule.validate();
      const auto result = bgrass::cmd_simulate(sim);
      double bg = 0.0, bs = 0.0;
      for (const auto& r : result.rows) (r.model == "BGrass" ? bg : bs) += r.metrics.rsse;
      std::cout << "replicates " << sim.replicates << ", mean RSSE BGrass " << bg / sim.replicates << ", Bss "
                << bs / sim.replicates << '\n'
                << "results written to " << sim.output_dir << '\n';
      return 0;
    }
  } catch (const bgrass::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
