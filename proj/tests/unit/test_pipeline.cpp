#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bgrass/pipeline.hpp"
#include "bgrass/storage.hpp"

using namespace bgrass;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bgrass_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small Sim-II data set written in the ingest formats, plus a config.
fs::path write_toy(const std::string& name, const std::string& extra_config = "") {
  const auto dir = scratch(name);
  const auto ont = synthetic_ontology(12, 3, 2);
  Sim2Design d;
  d.num_reports = 1500;
  d.eps_true = Epsilon::finite(0.1);
  const auto ds = generate_sim2(ont, d, 3);
  std::ostringstream reports, ontology;
  write_reports(reports, ds.reports, ds.schema);
  write_ontology(ontology, ds.ontology);
  spit(dir / "reports.csv", reports.str());
  spit(dir / "ontology.csv", ontology.str());
  spit(dir / "nc.txt", "AE001\nAE002\nAE003\nNOT_A_TERM\n");
  spit(dir / "config.json", R"({
  "inputs": {"reports": "reports.csv", "ontology": "ontology.csv", "negative_controls": "nc.txt"},
  "schema": {"covariates": [{"column": "gender"}, {"column": "age", "breaks": [30, 50, 65]}]},
  "filters": {"min_ae_count": 5},
  "epsilon": {"grid": [0.1, "inf"]},
  "schedule": {"iterations": 400, "burn_in": 200, "thin": 2},
  "chains": 2,
  "seed": 17,
  "threads": 1,
  "output_dir": "run")" + extra_config + "\n}\n");
  return dir;
}

}  // namespace

TEST_CASE("config parsing and defaults") {
  const auto c = config_from_json("{}");
  CHECK(c.hyper.a_alpha == 0.5);
  CHECK(c.hyper.b_alpha == 0.5);
  CHECK(c.hyper.k == 1.0);
  CHECK(c.hyper.pi == std::vector<double>{0.5});
  CHECK(c.schedule.iterations == 20000);
  CHECK(c.schedule.burn_in == 10000);
  CHECK(c.schedule.thin == 10);
  CHECK(c.chains == 3);
  CHECK(c.fdr_alpha == 0.01);
  CHECK(c.filters.min_ae_count == 25);
  CHECK(c.epsilon_grid.size() == 7);

  const auto d = config_from_json(R"({"inputs": {"reports": "r.csv"}, "epsilon": {"fixed": "inf"},
                                     "hyperparams": {"pi": [0.2, 0.3]}})",
                                  "/data");
  CHECK(d.reports_path == "/data/r.csv");
  CHECK(d.fixed_epsilon->is_infinite());
  CHECK(d.hyper.pi.size() == 2);
  CHECK_THROWS_AS(config_from_json("{bad"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"schedule": {"iterations": 10, "burn_in": 20}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"epsilon": {"grid": [0]}})"), std::exception);

  // The echo parses back to the same settings.
  const auto echo = config_from_json(config_to_json(d), "/elsewhere");
  CHECK(echo.reports_path == d.reports_path);
  CHECK(echo.hyper.pi == d.hyper.pi);
  CHECK(config_to_json(echo) == config_to_json(d));
}

TEST_CASE("fit writes a complete, reproducible run directory") {
  const auto dir = write_toy("fit");
  auto config = load_config((dir / "config.json").string());
  FitOptions opts;
  opts.allow_nonconverged = true;
  const auto r = cmd_fit(config, opts);
  for (const char* f : {"summary.csv", "enrichment.csv", "grid.csv", "diagnostics.json", "draws.bin", "manifest.json"})
    CHECK(fs::exists(dir / "run" / f));
  CHECK(r.exit_code == 0);
  CHECK(r.summary.aes.front().nc_prob.has_value());
  bool dropped_warning = false;
  for (const auto& w : r.warnings) dropped_warning |= w.find("NOT_A_TERM") != std::string::npos;
  CHECK(dropped_warning);

  const auto summary = slurp(dir / "run" / "summary.csv");
  const auto manifest = slurp(dir / "run" / "manifest.json");
  CHECK(manifest.find(sha256_file((dir / "reports.csv").string())) != std::string::npos);

  config.output_dir = (dir / "run2").string();
  cmd_fit(config, opts);
  CHECK(slurp(dir / "run2" / "summary.csv") == summary);
  CHECK(slurp(dir / "run2" / "draws.bin") == slurp(dir / "run" / "draws.bin"));

  const auto draws = read_draws((dir / "run" / "draws.bin").string());
  CHECK(draws.chains.size() == 2);
  CHECK(draws.chains[0].num_draws == 100);
}

TEST_CASE("fixed infinite epsilon is labeled Bss") {
  const auto dir = write_toy("bss", R"(, "epsilon": {"fixed": "inf"})");
  FitOptions opts;
  opts.allow_nonconverged = true;
  const auto r = cmd_fit(load_config((dir / "config.json").string()), opts);
  CHECK(r.model == "Bss");
  CHECK(slurp(dir / "run" / "manifest.json").find("\"model\": \"Bss\"") != std::string::npos);
}

TEST_CASE("validate reports graph statistics and missing files") {
  const auto dir = scratch("validate");
  spit(dir / "reports.csv", "report_id,vaccine,ae_terms\nr1,1,a;b;c\nr2,0,a;b;c\nr3,1,a\n");
  spit(dir / "ontology.csv", "a,G1\nb,G1\nc,G1\n");
  spit(dir / "config.json", R"({"inputs": {"reports": "reports.csv", "ontology": "ontology.csv"},
                                "filters": {"min_ae_count": 1}})");
  const auto report = cmd_validate(load_config((dir / "config.json").string()));
  CHECK(report.num_aes == 3);
  CHECK(report.num_edges == 3);
  CHECK(report.num_groups == 1);
  CHECK(report.conditioning.size() == 7);
  std::ostringstream out;
  print_validate_report(out, report);
  CHECK(out.str().find("|E| = 3") != std::string::npos);

  spit(dir / "config.json", R"({"inputs": {"reports": "reports.csv", "ontology": "missing.csv"}})");
  try {
    cmd_validate(load_config((dir / "config.json").string()));
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("missing.csv") != std::string::npos);
  }
}

TEST_CASE("simulate writes one row per model and metric") {
  const auto dir = scratch("simulate");
  SimulateOptions o;
  o.design = "sim1";
  o.replicates = 1;
  o.sim1.num_reports = 1000;
  o.schedule = {300, 100, 2};
  o.chains = 2;
  o.epsilon_grid = {Epsilon::finite(0.1)};
  o.threads = 1;
  o.output_dir = dir.string();
  o.export_data = true;
  const auto r = cmd_simulate(o);
  CHECK(r.rows.size() == 2);
  CHECK(r.mmse_terms.size() == 70);
  const auto long_csv = slurp(dir / "metrics_long.csv");
  CHECK(long_csv.find("0,BGrass,rsse,") != std::string::npos);
  CHECK(long_csv.find("0,Bss,auc,") != std::string::npos);
  CHECK(fs::exists(dir / "replicate_000" / "reports.csv"));
  // Exported data round-trips through the parser.
  ReportSchema schema;
  const auto parsed = parse_reports((dir / "replicate_000" / "reports.csv").string(), schema);
  CHECK(parsed.records.size() == 1000);
  CHECK(parsed.diagnostics.empty());
}
