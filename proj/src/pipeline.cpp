#include "bgrass/pipeline.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include "bgrass/parallel.hpp"
#include "bgrass/storage.hpp"
#include "json.hpp"

namespace bgrass {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

char single_char(const json& j, const std::string& key, char fallback) {
  if (!j.contains(key)) return fallback;
  const auto s = j.at(key).get<std::string>();
  if (s == "\\t" || s == "tab") return '\t';
  if (s.size() != 1) throw ConfigError("'" + key + "' must be a single character");
  return s[0];
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

Epsilon epsilon_from_json(const json& j) {
  if (j.is_string()) return Epsilon::parse(j.get<std::string>());
  if (j.is_number()) return Epsilon::finite(j.get<double>());
  throw ConfigError("epsilon values must be numbers or \"inf\"");
}

std::vector<std::string> read_term_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open negative-control list: " + path);
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t");
    terms.push_back(line.substr(first, last - first + 1));
  }
  return terms;
}

ordered_json hyper_json(const Hyperparams& h) {
  ordered_json j;
  j["a_alpha"] = h.a_alpha;
  j["b_alpha"] = h.b_alpha;
  j["k"] = h.k;
  if (h.pi.size() == 1) {
    j["pi"] = h.pi.front();
  } else {
    j["pi"] = h.pi;
  }
  return j;
}

ordered_json schedule_json(const Schedule& s) {
  return ordered_json{{"iterations", s.iterations}, {"burn_in", s.burn_in}, {"thin", s.thin}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct PreparedData {
  ParsedReports parsed;
  StratifySummary stratify;
  StratifiedCells cells;
  OntologyMapping mapping;
  OntologyGraph graph;
};

PreparedData prepare(const RunConfig& config) {
  PreparedData d;
  if (config.reports_path.empty()) throw ConfigError("config does not name a reports file");
  if (!config.ontology_path.empty() && !fs::exists(config.ontology_path))
    throw ConfigError("ontology file not found: " + config.ontology_path);
  d.parsed = parse_reports(config.reports_path, config.schema);
  d.cells = filter_and_stratify(d.parsed.records, config.schema, config.filters, &d.stratify);
  if (!config.ontology_path.empty()) {
    d.mapping = parse_ontology(config.ontology_path, config.ontology_delimiter);
  }
  d.graph = build_graph(d.mapping, d.cells.ae_vocabulary);
  return d;
}

void export_replicate(const std::string& root, std::size_t replicate, const SimDataset& ds) {
  char name[32];
  std::snprintf(name, sizeof(name), "replicate_%03zu", replicate);
  const fs::path dir = fs::path(root) / name;
  fs::create_directories(dir);
  std::ostringstream reports, ontology, truth;
  write_reports(reports, ds.reports, ds.schema);
  write_ontology(ontology, ds.ontology);
  truth << std::setprecision(17) << "ae,logor\n";
  for (std::size_t j = 0; j < ds.true_beta.size(); ++j) truth << ds.cells.ae_vocabulary[j] << ',' << ds.true_beta[j] << '\n';
  write_text(dir / "reports.csv", reports.str());
  write_text(dir / "ontology.csv", ontology.str());
  write_text(dir / "truth.csv", truth.str());
}

}  // namespace

std::vector<std::uint64_t> RunConfig::chain_seeds() const {
  std::vector<std::uint64_t> seeds;
  for (int c = 0; c < chains; ++c) seeds.push_back(derive_seed(seed, static_cast<std::uint64_t>(c)));
  return seeds;
}

int RunConfig::resolved_threads() const { return threads > 0 ? threads : default_threads(); }

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto base = fs::path(path).parent_path().string();
  return config_from_json(buf.str(), base.empty() ? "." : base);
}

RunConfig config_from_json(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text, nullptr, true, true);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("inputs")) {
      const auto& in = j.at("inputs");
      c.reports_path = resolve(base_dir, in.value("reports", std::string()));
      c.ontology_path = resolve(base_dir, in.value("ontology", std::string()));
      c.negative_controls_path = resolve(base_dir, in.value("negative_controls", std::string()));
      c.ontology_delimiter = single_char(in, "ontology_delimiter", ',');
    }
    if (j.contains("schema")) {
      const auto& s = j.at("schema");
      c.schema.delimiter = single_char(s, "delimiter", ',');
      c.schema.id_column = s.value("id_column", c.schema.id_column);
      c.schema.vaccine_column = s.value("vaccine_column", c.schema.vaccine_column);
      if (s.contains("vaccine_codes")) {
        c.schema.vaccine_codes.clear();
        for (const auto& [code, v] : s.at("vaccine_codes").items()) {
          const int value = v.get<int>();
          if (value != 0 && value != 1) throw ConfigError("vaccine code '" + code + "' must map to 0 or 1");
          c.schema.vaccine_codes[code] = value;
        }
      }
      for (const auto& cov : s.value("covariates", json::array())) {
        CovariateSpec spec;
        spec.column = cov.at("column").get<std::string>();
        spec.breaks = cov.value("breaks", std::vector<double>{});
        if (!std::is_sorted(spec.breaks.begin(), spec.breaks.end()))
          throw ConfigError("breaks for '" + spec.column + "' must be ascending");
        if (cov.contains("reference")) spec.reference = cov.at("reference").get<std::string>();
        c.schema.covariates.push_back(std::move(spec));
      }
      c.schema.filter_columns = s.value("filter_columns", std::vector<std::string>{});
      c.schema.ae_column = s.value("ae_column", c.schema.ae_column);
      c.schema.ae_delimiter = single_char(s, "ae_delimiter", ';');
    }
    if (j.contains("filters")) {
      const auto& f = j.at("filters");
      c.filters.min_ae_count = f.value("min_ae_count", c.filters.min_ae_count);
      for (const auto& rule : f.value("exclusions", std::vector<std::string>{}))
        c.filters.exclusions.push_back(ExclusionRule::parse(rule));
    }
    if (j.contains("hyperparams")) {
      const auto& h = j.at("hyperparams");
      c.hyper.a_alpha = h.value("a_alpha", c.hyper.a_alpha);
      c.hyper.b_alpha = h.value("b_alpha", c.hyper.b_alpha);
      c.hyper.k = h.value("k", c.hyper.k);
      if (h.contains("pi")) {
        const auto& pi = h.at("pi");
        c.hyper.pi = pi.is_array() ? pi.get<std::vector<double>>() : std::vector<double>{pi.get<double>()};
      }
    }
    if (j.contains("epsilon")) {
      const auto& e = j.at("epsilon");
      if (e.contains("fixed")) c.fixed_epsilon = epsilon_from_json(e.at("fixed"));
      if (e.contains("grid")) {
        c.epsilon_grid.clear();
        for (const auto& v : e.at("grid")) c.epsilon_grid.push_back(epsilon_from_json(v));
        if (c.epsilon_grid.empty()) throw ConfigError("epsilon grid is empty");
      }
    }
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      c.schedule.iterations = s.value("iterations", c.schedule.iterations);
      c.schedule.burn_in = s.value("burn_in", c.schedule.burn_in);
      c.schedule.thin = s.value("thin", c.schedule.thin);
    }
    c.chains = j.value("chains", c.chains);
    c.seed = j.value("seed", c.seed);
    c.fdr_alpha = j.value("fdr_alpha", c.fdr_alpha);
    c.effect_threshold = j.value("effect_threshold", c.effect_threshold);
    if (j.contains("enrichment")) {
      c.enrichment.min_group_size = j.at("enrichment").value("min_group_size", c.enrichment.min_group_size);
      c.enrichment.fdr_alpha = j.at("enrichment").value("fdr_alpha", c.enrichment.fdr_alpha);
    }
    c.rhat_threshold = j.value("rhat_threshold", c.rhat_threshold);
    c.pg_exact_max_b = j.value("pg_exact_max_b", c.pg_exact_max_b);
    c.output_dir = resolve(base_dir, j.value("output_dir", c.output_dir));
    c.threads = j.value("threads", c.threads);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  try {
    c.schedule.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (c.chains < 1) throw ConfigError("chains must be >= 1");
  if (!(c.fdr_alpha > 0.0 && c.fdr_alpha < 1.0)) throw ConfigError("fdr_alpha must lie in (0, 1)");
  return c;
}

std::string config_to_json(const RunConfig& c) {
  ordered_json j;
  j["inputs"] = {{"reports", c.reports_path},
                 {"ontology", c.ontology_path},
                 {"negative_controls", c.negative_controls_path},
                 {"ontology_delimiter", std::string(1, c.ontology_delimiter)}};
  ordered_json schema;
  schema["delimiter"] = std::string(1, c.schema.delimiter);
  schema["id_column"] = c.schema.id_column;
  schema["vaccine_column"] = c.schema.vaccine_column;
  schema["vaccine_codes"] = c.schema.vaccine_codes;
  schema["covariates"] = ordered_json::array();
  for (const auto& cov : c.schema.covariates) {
    ordered_json cj{{"column", cov.column}, {"breaks", cov.breaks}};
    if (cov.reference) cj["reference"] = *cov.reference;
    schema["covariates"].push_back(cj);
  }
  schema["filter_columns"] = c.schema.filter_columns;
  schema["ae_column"] = c.schema.ae_column;
  schema["ae_delimiter"] = std::string(1, c.schema.ae_delimiter);
  j["schema"] = schema;
  std::vector<std::string> rules;
  for (const auto& r : c.filters.exclusions) rules.push_back(r.to_string());
  j["filters"] = {{"min_ae_count", c.filters.min_ae_count}, {"exclusions", rules}};
  j["hyperparams"] = hyper_json(c.hyper);
  std::vector<std::string> grid;
  for (const auto& e : c.epsilon_grid) grid.push_back(e.to_string());
  j["epsilon"] = {{"grid", grid}};
  if (c.fixed_epsilon) j["epsilon"]["fixed"] = c.fixed_epsilon->to_string();
  j["schedule"] = schedule_json(c.schedule);
  j["chains"] = c.chains;
  j["seed"] = c.seed;
  j["fdr_alpha"] = c.fdr_alpha;
  j["effect_threshold"] = c.effect_threshold;
  j["enrichment"] = {{"min_group_size", c.enrichment.min_group_size}, {"fdr_alpha", c.enrichment.fdr_alpha}};
  j["rhat_threshold"] = c.rhat_threshold;
  j["pg_exact_max_b"] = c.pg_exact_max_b;
  j["output_dir"] = c.output_dir;
  return j.dump(2);
}

FitResult cmd_fit(const RunConfig& config, const FitOptions& options) {
  FitResult result;
  auto data = prepare(config);
  for (const auto& w : data.parsed.warnings) result.warnings.push_back(w);
  for (const auto& w : data.mapping.warnings) result.warnings.push_back(w);
  if (!config.ontology_path.empty() && data.graph.groups.empty())
    result.warnings.push_back("ontology covers none of the modeled AEs; the graph is fully isolated");

  std::mutex progress_mutex;
  ProgressCallback progress;
  if (options.progress) {
    progress = [&](int chain, long it, long total) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      *options.progress << "chain " << chain << ": " << it << "/" << total << '\n';
    };
  }
  SamplerOptions sampler_options{config.pg_exact_max_b};
  const auto seeds = config.chain_seeds();
  const int threads = config.resolved_threads();

  EpsilonGrid grid;
  DrawStore draws;
  if (config.fixed_epsilon) {
    const auto corr = correlation_from_graph(data.graph, *config.fixed_epsilon);
    draws = run_chains(data.cells, corr, config.hyper, config.schedule, seeds, threads, sampler_options, progress);
    GridEntry entry;
    entry.epsilon = *config.fixed_epsilon;
    entry.dic = dic(draws, data.cells);
    entry.chosen = true;
    grid.entries.push_back(entry);
  } else {
    auto search = grid_search(data.cells, data.graph, config.hyper, config.epsilon_grid, config.schedule, seeds,
                              threads, sampler_options);
    grid = search.grid;
    draws = std::move(search.draws[grid.chosen]);
    for (const auto& e : grid.entries)
      if (e.failed) result.warnings.push_back("epsilon " + e.epsilon.to_string() + " failed: " + e.error);
  }
  result.epsilon = grid.chosen_epsilon();
  result.model = result.epsilon.is_infinite() ? "Bss" : "BGrass";
  const auto& chosen_dic = grid.entries[grid.chosen].dic;
  if (chosen_dic.pd < 0.0) result.warnings.push_back("negative effective number of parameters (p_D < 0)");

  result.summary = summarize(draws);
  if (!config.negative_controls_path.empty()) {
    std::map<std::string, int> index;
    for (std::size_t j = 0; j < data.cells.ae_vocabulary.size(); ++j)
      index[data.cells.ae_vocabulary[j]] = static_cast<int>(j);
    std::vector<int> nc;
    for (const auto& term : read_term_list(config.negative_controls_path)) {
      const auto it = index.find(term);
      if (it == index.end()) {
        result.warnings.push_back("negative control '" + term + "' is not in the modeled vocabulary; dropped");
      } else {
        nc.push_back(it->second);
      }
    }
    std::sort(nc.begin(), nc.end());
    nc.erase(std::unique(nc.begin(), nc.end()), nc.end());
    if (nc.size() < 2) throw ConfigError("fewer than two negative controls remain in the vocabulary");
    const auto probs = nc_adjust(draws, nc);
    for (std::size_t j = 0; j < probs.size(); ++j) result.summary.aes[j].nc_prob = probs[j];
  }
  flag_signals(result.summary, {config.fdr_alpha, config.effect_threshold});
  result.summary.groups = enrichment(draws, data.graph.groups, config.enrichment, &result.warnings);

  result.max_rhat = result.summary.diagnostics.max_rhat;
  if (config.chains < 2) result.warnings.push_back("single chain: Gelman-Rubin diagnostic not available");
  result.converged = result.max_rhat < config.rhat_threshold;
  result.exit_code = (!result.converged && !options.allow_nonconverged) ? 2 : 0;

  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  result.run_dir = dir.string();
  {
    std::ostringstream s;
    write_summary_csv(s, result.summary);
    write_text(dir / "summary.csv", s.str());
  }
  {
    std::ostringstream s;
    write_enrichment_csv(s, result.summary.groups);
    write_text(dir / "enrichment.csv", s.str());
  }
  {
    std::ostringstream s;
    write_grid_csv(s, grid);
    write_text(dir / "grid.csv", s.str());
  }
  write_draws((dir / "draws.bin").string(), draws);

  ordered_json diag;
  diag["model"] = result.model;
  diag["epsilon"] = result.epsilon.to_string();
  diag["max_rhat"] = result.max_rhat;
  diag["rhat_threshold"] = config.rhat_threshold;
  diag["converged"] = result.converged;
  diag["dic"] = {{"dic", chosen_dic.dic}, {"dbar", chosen_dic.dbar}, {"d_hat", chosen_dic.d_hat}, {"pd", chosen_dic.pd}};
  diag["rhat"] = ordered_json::array();
  const auto& rh = result.summary.diagnostics;
  for (std::size_t j = 0; j < rh.rhat.size(); ++j)
    diag["rhat"].push_back({{"ae", data.cells.ae_vocabulary[j]}, {"rhat", rh.rhat[j]}, {"degenerate", bool(rh.degenerate[j])}});
  diag["ingest"] = {{"reports_parsed", data.parsed.records.size()},
                    {"malformed_rows", data.parsed.diagnostics.size()},
                    {"reports_excluded", data.stratify.reports_excluded},
                    {"reports_without_modeled_ae", data.stratify.reports_without_modeled_ae},
                    {"aes_dropped", data.stratify.aes_dropped},
                    {"num_aes", data.cells.num_aes()},
                    {"num_strata", data.cells.num_strata()}};
  diag["parse_diagnostics"] = ordered_json::array();
  for (const auto& d : data.parsed.diagnostics) diag["parse_diagnostics"].push_back({{"line", d.line}, {"message", d.message}});
  diag["warnings"] = result.warnings;
  write_text(dir / "diagnostics.json", diag.dump(2) + "\n");

  ordered_json manifest;
  manifest["tool"] = "bgrass";
  manifest["format_version"] = 1;
  manifest["model"] = result.model;
  manifest["epsilon"] = result.epsilon.to_string();
  manifest["seeds"] = seeds;
  manifest["schedule"] = schedule_json(config.schedule);
  manifest["hyperparams"] = hyper_json(config.hyper);
  manifest["config"] = ordered_json::parse(config_to_json(config));
  ordered_json inputs;
  inputs["reports"] = {{"path", config.reports_path}, {"sha256", sha256_file(config.reports_path)}};
  if (!config.ontology_path.empty())
    inputs["ontology"] = {{"path", config.ontology_path}, {"sha256", sha256_file(config.ontology_path)}};
  if (!config.negative_controls_path.empty())
    inputs["negative_controls"] = {{"path", config.negative_controls_path},
                                   {"sha256", sha256_file(config.negative_controls_path)}};
  manifest["inputs"] = inputs;
  ordered_json outputs;
  for (const char* name : {"summary.csv", "enrichment.csv", "grid.csv", "diagnostics.json", "draws.bin"})
    outputs[name] = sha256_file((dir / name).string());
  manifest["outputs"] = outputs;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

ValidateReport cmd_validate(const RunConfig& config) {
  ValidateReport report;
  auto data = prepare(config);
  report.reports_parsed = data.parsed.records.size();
  report.malformed_rows = data.parsed.diagnostics.size();
  report.stratify = data.stratify;
  report.num_aes = data.cells.num_aes();
  report.num_strata = data.cells.num_strata();
  report.num_predictors = data.cells.num_predictors();
  report.num_edges = data.graph.num_edges();
  report.num_groups = data.graph.groups.size();
  for (int j = 0; j < data.graph.num_vertices; ++j) report.isolated_aes += data.graph.degree(j) == 0 ? 1 : 0;
  report.warnings = data.parsed.warnings;
  for (const auto& w : data.mapping.warnings) report.warnings.push_back(w);
  for (const auto& d : data.parsed.diagnostics)
    report.warnings.push_back("line " + std::to_string(d.line) + ": " + d.message);
  const Eigen::MatrixXd lap = laplacian(data.graph);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  std::vector<Epsilon> eps = config.epsilon_grid;
  if (config.fixed_epsilon) eps = {*config.fixed_epsilon};
  for (const auto& e : eps) {
    const double cond = e.is_infinite() ? 1.0 : (ev.maxCoeff() + e.value()) / (ev.minCoeff() + e.value());
    report.conditioning.emplace_back(e, cond);
  }
  return report;
}

void print_validate_report(std::ostream& out, const ValidateReport& r) {
  out << "reports parsed: " << r.reports_parsed << " (malformed rows: " << r.malformed_rows << ")\n";
  out << "reports excluded: " << r.stratify.reports_excluded
      << ", without modeled AE: " << r.stratify.reports_without_modeled_ae << "\n";
  out << "J = " << r.num_aes << " AEs (" << r.stratify.aes_dropped << " dropped by min count)\n";
  out << "S = " << r.num_strata << " strata, " << r.num_predictors << " design columns\n";
  out << "graph: |E| = " << r.num_edges << ", groups = " << r.num_groups << ", isolated = " << r.isolated_aes << "\n";
  for (const auto& [e, cond] : r.conditioning)
    out << "epsilon " << e.to_string() << ": cond(L + eps I) = " << std::setprecision(6) << cond << "\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
}

SimulationResult cmd_simulate(const SimulateOptions& options) {
  if (options.design != "sim1" && options.design != "sim2")
    throw ConfigError("unknown simulation design '" + options.design + "' (expected sim1 or sim2)");
  if (options.replicates < 1) throw ConfigError("replicates must be >= 1");
  SyntheticOntology sim2_ontology;
  if (options.design == "sim2")
    sim2_ontology = synthetic_ontology(options.sim2_num_aes, options.sim2_num_groups, options.sim2_graph_seed);

  std::vector<Epsilon> grid = options.epsilon_grid;
  if (options.bgrass_epsilon) grid = {*options.bgrass_epsilon};
  if (std::find(grid.begin(), grid.end(), Epsilon::infinite()) == grid.end()) grid.push_back(Epsilon::infinite());

  struct Replicate {
    std::vector<ReplicateModelResult> rows;
    std::map<std::string, std::string> group_of;
  };
  std::vector<Replicate> reps(options.replicates);
  const int threads = options.threads > 0 ? options.threads : default_threads();
  parallel_for(reps.size(), threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(options.seed, r);
    SimDataset ds = options.design == "sim1" ? generate_sim1(options.sim1, rep_seed)
                                             : generate_sim2(sim2_ontology, options.sim2, rep_seed);
    if (options.export_data && !options.output_dir.empty()) export_replicate(options.output_dir, r, ds);
    std::vector<std::uint64_t> seeds;
    for (int c = 0; c < options.chains; ++c) seeds.push_back(derive_seed(rep_seed, 1000 + c));
    auto search = grid_search(ds.cells, ds.graph, options.hyper, grid, options.schedule, seeds, 1);
    std::size_t bss = 0;
    for (std::size_t g = 0; g < grid.size(); ++g)
      if (grid[g].is_infinite()) bss = g;
    std::size_t bgrass = search.grid.chosen;
    if (options.bgrass_epsilon) bgrass = 0;
    if (search.grid.entries[bss].failed || search.grid.entries[bgrass].failed)
      throw std::runtime_error("simulation replicate " + std::to_string(r) + ": model fit failed");
    for (const auto& [term, group] : ds.ontology.pairs) reps[r].group_of.emplace(term, group);
    for (const auto& [name, g] : {std::pair<std::string, std::size_t>{"BGrass", bgrass}, {"Bss", bss}}) {
      const auto& draws = search.draws[g];
      const auto summary = summarize(draws);
      ReplicateModelResult row;
      row.replicate = static_cast<int>(r);
      row.model = name;
      row.epsilon = grid[g];
      row.dic = search.grid.entries[g].dic.dic;
      row.terms = ds.cells.ae_vocabulary;
      row.truth = ds.true_beta;
      std::vector<double> pos, sel;
      for (const auto& ae : summary.aes) {
        row.estimate.push_back(ae.mean);
        pos.push_back(ae.prob_positive);
        sel.push_back(ae.selection_prob);
      }
      row.metrics = metrics(row.truth, row.estimate, pos);
      row.max_rhat = summary.diagnostics.max_rhat;
      const auto picked = fdr_select(sel, options.fdr_alpha);
      row.num_selected = static_cast<int>(picked.selected.size());
      for (int idx : picked.selected) row.false_discoveries += row.truth[idx] == 0.0 ? 1 : 0;
      row.realized_fdr = row.num_selected ? static_cast<double>(row.false_discoveries) / row.num_selected : 0.0;
      reps[r].rows.push_back(std::move(row));
    }
  });

  SimulationResult out;
  std::map<std::string, std::array<double, 4>> acc;  // term -> sum_bgrass, n_bgrass, sum_bss, n_bss
  std::map<std::string, std::string> group_of;
  for (auto& rep : reps) {
    group_of.insert(rep.group_of.begin(), rep.group_of.end());
    for (auto& row : rep.rows) {
      const int offset = row.model == "BGrass" ? 0 : 2;
      for (std::size_t j = 0; j < row.terms.size(); ++j) {
        acc[row.terms[j]][offset] += row.metrics.squared_errors[j];
        acc[row.terms[j]][offset + 1] += 1.0;
      }
      out.rows.push_back(std::move(row));
    }
  }
  for (const auto& [term, a] : acc) {
    out.mmse_terms.push_back(term);
    const auto g = group_of.find(term);
    out.mmse_groups.push_back(g == group_of.end() ? "isolated" : g->second);
    out.mmse_bgrass.push_back(a[1] > 0 ? a[0] / a[1] : 0.0);
    out.mmse_bss.push_back(a[3] > 0 ? a[2] / a[3] : 0.0);
  }
  if (!options.output_dir.empty()) write_simulation_outputs(options.output_dir, out);
  return out;
}

void write_simulation_outputs(const std::string& dir_name, const SimulationResult& result) {
  const fs::path dir(dir_name);
  fs::create_directories(dir);
  std::ostringstream metrics_csv, long_csv, mmse_csv;
  metrics_csv << std::setprecision(10);
  long_csv << std::setprecision(10);
  mmse_csv << std::setprecision(10);
  metrics_csv << "replicate,model,epsilon,dic,rsse,auc,max_rhat,num_selected,false_discoveries,realized_fdr\n";
  long_csv << "replicate,model,metric,value\n";
  for (const auto& r : result.rows) {
    metrics_csv << r.replicate << ',' << r.model << ',' << r.epsilon.to_string() << ',' << r.dic << ','
                << r.metrics.rsse << ',' << (r.metrics.auc ? std::to_string(*r.metrics.auc) : std::string()) << ','
                << r.max_rhat << ',' << r.num_selected << ',' << r.false_discoveries << ',' << r.realized_fdr << '\n';
    long_csv << r.replicate << ',' << r.model << ",rsse," << r.metrics.rsse << '\n';
    if (r.metrics.auc) long_csv << r.replicate << ',' << r.model << ",auc," << *r.metrics.auc << '\n';
  }
  mmse_csv << "ae,group,mmse_bgrass,mmse_bss,ratio\n";
  for (std::size_t j = 0; j < result.mmse_terms.size(); ++j) {
    mmse_csv << result.mmse_terms[j] << ',' << result.mmse_groups[j] << ',' << result.mmse_bgrass[j] << ','
             << result.mmse_bss[j] << ',';
    if (result.mmse_bss[j] > 0) mmse_csv << result.mmse_bgrass[j] / result.mmse_bss[j];
    mmse_csv << '\n';
  }
  write_text(dir / "metrics.csv", metrics_csv.str());
  write_text(dir / "metrics_long.csv", long_csv.str());
  write_text(dir / "mmse.csv", mmse_csv.str());
}

}  // namespace bgrass
