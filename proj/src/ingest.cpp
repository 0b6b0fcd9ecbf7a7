#include "bgrass/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace bgrass {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  std::istringstream in(t);
  in.imbue(std::locale::classic());
  double v = 0.0;
  in >> v;
  if (in.fail() || !in.eof()) return std::nullopt;
  return v;
}

std::string strip_bom(std::string line) {
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  return line;
}

std::string format_break(double v) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << v;
  return out.str();
}

std::string bin_label(int bin, const std::vector<double>& breaks) {
  if (bin == 0) return "<" + format_break(breaks.front());
  if (bin == static_cast<int>(breaks.size())) return ">=" + format_break(breaks.back());
  return "[" + format_break(breaks[bin - 1]) + "," + format_break(breaks[bin]) + ")";
}

const std::string* lookup_field(const ReportRecord& rec, const ReportSchema& schema, const std::string& column) {
  if (column == schema.vaccine_column) return &rec.vaccine_code;
  if (column == schema.id_column) return &rec.report_id;
  for (std::size_t i = 0; i < schema.covariates.size(); ++i) {
    if (schema.covariates[i].column == column) return &rec.covariates[i];
  }
  for (std::size_t i = 0; i < schema.filter_columns.size(); ++i) {
    if (schema.filter_columns[i] == column) return &rec.filter_values[i];
  }
  return nullptr;
}

bool rule_matches(const ExclusionRule& rule, const std::string& raw) {
  using Op = ExclusionRule::Op;
  const auto lhs = parse_number(raw);
  const auto rhs = parse_number(rule.value);
  int cmp = 0;
  if (lhs && rhs) {
    cmp = *lhs < *rhs ? -1 : (*lhs > *rhs ? 1 : 0);
  } else {
    const int c = trim(raw).compare(rule.value);
    cmp = c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  switch (rule.op) {
    case Op::kLess: return cmp < 0;
    case Op::kLessEqual: return cmp <= 0;
    case Op::kGreater: return cmp > 0;
    case Op::kGreaterEqual: return cmp >= 0;
    case Op::kEqual: return cmp == 0;
    case Op::kNotEqual: return cmp != 0;
  }
  return false;
}

}  // namespace

std::vector<std::string> split_delimited(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  std::size_t end = line.size();
  if (end > 0 && line[end - 1] == '\r') --end;
  for (std::size_t i = 0; i < end; ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < end && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delimiter) {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

ParsedReports parse_reports(const std::string& path, const ReportSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open reports file: " + path);
  return parse_reports(in, schema);
}

ParsedReports parse_reports(std::istream& in, const ReportSchema& schema) {
  ParsedReports out;
  std::string line;
  if (!std::getline(in, line)) {
    out.warnings.push_back("reports file is empty");
    return out;
  }
  const auto header = split_delimited(strip_bom(line), schema.delimiter);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[trim(header[i])] = i;
  auto column = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw ConfigError("reports file is missing declared column '" + name + "'");
    return it->second;
  };
  const std::size_t id_col = column(schema.id_column);
  const std::size_t vac_col = column(schema.vaccine_column);
  const std::size_t ae_col = column(schema.ae_column);
  std::vector<std::size_t> cov_cols;
  for (const auto& cov : schema.covariates) cov_cols.push_back(column(cov.column));
  std::vector<std::size_t> filter_cols;
  for (const auto& name : schema.filter_columns) filter_cols.push_back(column(name));

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_delimited(line, schema.delimiter);
    if (fields.size() != header.size()) {
      out.diagnostics.push_back({line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                              std::to_string(fields.size())});
      continue;
    }
    ReportRecord rec;
    rec.report_id = trim(fields[id_col]);
    rec.vaccine_code = trim(fields[vac_col]);
    const auto code = schema.vaccine_codes.find(rec.vaccine_code);
    if (code == schema.vaccine_codes.end()) {
      out.diagnostics.push_back({line_no, "unknown vaccine code '" + rec.vaccine_code + "'"});
      continue;
    }
    rec.vaccine = code->second;
    bool ok = true;
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      std::string value = trim(fields[cov_cols[c]]);
      if (value.empty()) {
        out.diagnostics.push_back({line_no, "empty covariate '" + schema.covariates[c].column + "'"});
        ok = false;
        break;
      }
      if (!schema.covariates[c].breaks.empty() && !parse_number(value)) {
        out.diagnostics.push_back(
            {line_no, "non-numeric value '" + value + "' for binned covariate '" + schema.covariates[c].column + "'"});
        ok = false;
        break;
      }
      rec.covariates.push_back(std::move(value));
    }
    if (!ok) continue;
    for (std::size_t c : filter_cols) rec.filter_values.push_back(trim(fields[c]));
    std::set<std::string> terms;
    for (const auto& term : split_delimited(fields[ae_col], schema.ae_delimiter)) {
      auto t = trim(term);
      if (!t.empty()) terms.insert(std::move(t));
    }
    rec.ae_terms.assign(terms.begin(), terms.end());
    out.records.push_back(std::move(rec));
  }
  if (out.records.empty()) out.warnings.push_back("reports file contains no valid records");
  return out;
}

ExclusionRule ExclusionRule::parse(const std::string& text) {
  static const std::vector<std::pair<std::string, Op>> ops = {
      {"<=", Op::kLessEqual}, {">=", Op::kGreaterEqual}, {"==", Op::kEqual},
      {"!=", Op::kNotEqual},  {"<", Op::kLess},           {">", Op::kGreater}};
  for (const auto& [token, op] : ops) {
    const auto pos = text.find(token);
    if (pos == std::string::npos) continue;
    ExclusionRule rule;
    rule.column = trim(text.substr(0, pos));
    rule.op = op;
    rule.value = trim(text.substr(pos + token.size()));
    if (rule.column.empty() || rule.value.empty()) break;
    return rule;
  }
  throw ConfigError("cannot parse exclusion rule '" + text + "' (expected '<column> <op> <value>')");
}

std::string ExclusionRule::to_string() const {
  static const char* names[] = {"<", "<=", ">", ">=", "==", "!="};
  return column + " " + names[static_cast<int>(op)] + " " + value;
}

int bin_index(double value, const std::vector<double>& breaks) {
  return static_cast<int>(std::upper_bound(breaks.begin(), breaks.end(), value) - breaks.begin());
}

StratifiedCells filter_and_stratify(const std::vector<ReportRecord>& records, const ReportSchema& schema,
                                    const FilterOptions& options, StratifySummary* summary) {
  if (options.min_ae_count < 0) throw ConfigError("min_ae_count must be >= 0");
  for (const auto& rule : options.exclusions) {
    bool known = rule.column == schema.vaccine_column || rule.column == schema.id_column;
    for (const auto& cov : schema.covariates) known = known || cov.column == rule.column;
    for (const auto& f : schema.filter_columns) known = known || f == rule.column;
    if (!known) throw ConfigError("exclusion rule refers to unknown column '" + rule.column + "'");
  }
  StratifySummary local;
  local.reports_in = records.size();

  std::vector<const ReportRecord*> kept;
  for (const auto& rec : records) {
    bool excluded = false;
    for (const auto& rule : options.exclusions) {
      if (rule_matches(rule, *lookup_field(rec, schema, rule.column))) {
        excluded = true;
        break;
      }
    }
    if (excluded) {
      ++local.reports_excluded;
    } else {
      kept.push_back(&rec);
    }
  }
  if (kept.empty()) throw ConfigError("no reports remain after exclusions");

  // AE vocabulary: descending total count, ties alphabetical.
  std::map<std::string, long long> totals;
  for (const auto* rec : kept)
    for (const auto& t : rec->ae_terms) ++totals[t];
  std::vector<std::pair<std::string, long long>> vocab;
  for (const auto& [term, count] : totals) {
    if (count >= options.min_ae_count) {
      vocab.emplace_back(term, count);
    } else {
      ++local.aes_dropped;
    }
  }
  if (vocab.empty()) throw ConfigError("all AEs were filtered out (min_ae_count = " +
                                       std::to_string(options.min_ae_count) + ")");
  std::stable_sort(vocab.begin(), vocab.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::map<std::string, int> ae_index;
  StratifiedCells cells;
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    ae_index[vocab[j].first] = static_cast<int>(j);
    cells.ae_vocabulary.push_back(vocab[j].first);
  }

  // Covariate levels in canonical order.
  const std::size_t num_cov = schema.covariates.size();
  std::vector<std::vector<int>> report_levels(kept.size(), std::vector<int>(num_cov));
  for (std::size_t c = 0; c < num_cov; ++c) {
    const auto& spec = schema.covariates[c];
    cells.covariate_names.push_back(spec.column);
    std::vector<std::string> labels;
    std::vector<int> raw(kept.size());
    if (spec.breaks.empty()) {
      std::set<std::string> seen;
      for (const auto* rec : kept) seen.insert(rec->covariates[c]);
      labels.assign(seen.begin(), seen.end());
      for (std::size_t r = 0; r < kept.size(); ++r)
        raw[r] = static_cast<int>(std::lower_bound(labels.begin(), labels.end(), kept[r]->covariates[c]) -
                                  labels.begin());
    } else {
      std::set<int> bins;
      for (std::size_t r = 0; r < kept.size(); ++r) {
        raw[r] = bin_index(*parse_number(kept[r]->covariates[c]), spec.breaks);
        bins.insert(raw[r]);
      }
      std::vector<int> ordered(bins.begin(), bins.end());
      for (int b : ordered) labels.push_back(bin_label(b, spec.breaks));
      for (auto& v : raw) v = static_cast<int>(std::lower_bound(ordered.begin(), ordered.end(), v) - ordered.begin());
    }
    int ref = 0;
    if (spec.reference) {
      const auto it = std::find(labels.begin(), labels.end(), *spec.reference);
      if (it == labels.end())
        throw ConfigError("reference level '" + *spec.reference + "' not observed for covariate '" + spec.column + "'");
      ref = static_cast<int>(it - labels.begin());
    }
    // Rotate so the reference sits at index 0, preserving the order of the others.
    std::vector<int> remap(labels.size());
    std::vector<std::string> reordered{labels[ref]};
    remap[ref] = 0;
    for (int i = 0, next = 1; i < static_cast<int>(labels.size()); ++i) {
      if (i == ref) continue;
      remap[i] = next++;
      reordered.push_back(labels[i]);
    }
    for (std::size_t r = 0; r < kept.size(); ++r) report_levels[r][c] = remap[raw[r]];
    cells.covariate_levels.push_back(std::move(reordered));
  }

  // Strata keyed by (levels, V); std::map gives the canonical order.
  std::map<std::pair<std::vector<int>, int>, std::size_t> stratum_of;
  for (std::size_t r = 0; r < kept.size(); ++r) stratum_of.emplace(std::make_pair(report_levels[r], kept[r]->vaccine), 0);
  std::size_t s = 0;
  for (auto& [key, idx] : stratum_of) {
    idx = s++;
    cells.strata.push_back({key.first, key.second, 0});
  }
  const int num_strata = static_cast<int>(cells.strata.size());
  const int num_aes = static_cast<int>(cells.ae_vocabulary.size());
  cells.events = Eigen::MatrixXi::Zero(num_strata, num_aes);
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const std::size_t st = stratum_of.at({report_levels[r], kept[r]->vaccine});
    ++cells.strata[st].trials;
    bool any = false;
    for (const auto& t : kept[r]->ae_terms) {
      const auto it = ae_index.find(t);
      if (it == ae_index.end()) continue;
      ++cells.events(static_cast<Eigen::Index>(st), it->second);
      any = true;
    }
    if (!any) ++local.reports_without_modeled_ae;
  }

  cells.design_columns.push_back("(intercept)");
  for (std::size_t c = 0; c < num_cov; ++c)
    for (std::size_t l = 1; l < cells.covariate_levels[c].size(); ++l)
      cells.design_columns.push_back(cells.covariate_names[c] + "=" + cells.covariate_levels[c][l]);
  cells.design = Eigen::MatrixXd::Zero(num_strata, static_cast<Eigen::Index>(cells.design_columns.size()));
  cells.vaccine.resize(num_strata);
  cells.trials.resize(num_strata);
  for (int st = 0; st < num_strata; ++st) {
    const auto& stratum = cells.strata[st];
    cells.design(st, 0) = 1.0;
    Eigen::Index col = 1;
    for (std::size_t c = 0; c < num_cov; ++c) {
      const int width = static_cast<int>(cells.covariate_levels[c].size()) - 1;
      if (stratum.levels[c] > 0) cells.design(st, col + stratum.levels[c] - 1) = 1.0;
      col += width;
    }
    cells.vaccine(st) = stratum.vaccine;
    cells.trials(st) = stratum.trials;
  }
  if (summary) *summary = local;
  return cells;
}

StratifiedCells make_cells(Eigen::MatrixXd design, Eigen::VectorXd vaccine, Eigen::VectorXi trials,
                           Eigen::MatrixXi events, std::vector<std::string> ae_vocabulary) {
  const auto num_strata = design.rows();
  if (vaccine.size() != num_strata || trials.size() != num_strata || events.rows() != num_strata)
    throw std::invalid_argument("make_cells: inconsistent stratum counts");
  for (Eigen::Index s = 0; s < num_strata; ++s) {
    if (trials(s) < 1) throw std::invalid_argument("make_cells: every stratum needs n_s >= 1");
    for (Eigen::Index j = 0; j < events.cols(); ++j)
      if (events(s, j) < 0 || events(s, j) > trials(s))
        throw std::invalid_argument("make_cells: events must satisfy 0 <= y <= n");
  }
  StratifiedCells cells;
  if (ae_vocabulary.empty()) {
    for (Eigen::Index j = 0; j < events.cols(); ++j) ae_vocabulary.push_back("AE" + std::to_string(j + 1));
  }
  if (static_cast<Eigen::Index>(ae_vocabulary.size()) != events.cols())
    throw std::invalid_argument("make_cells: vocabulary size does not match events columns");
  cells.ae_vocabulary = std::move(ae_vocabulary);
  cells.design_columns.push_back("(intercept)");
  for (Eigen::Index c = 1; c < design.cols(); ++c) cells.design_columns.push_back("x" + std::to_string(c));
  for (Eigen::Index s = 0; s < num_strata; ++s)
    cells.strata.push_back({{}, static_cast<int>(vaccine(s)), trials(s)});
  cells.design = std::move(design);
  cells.vaccine = std::move(vaccine);
  cells.trials = std::move(trials);
  cells.events = std::move(events);
  return cells;
}

OntologyMapping parse_ontology(const std::string& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open ontology file: " + path);
  return parse_ontology(in, delimiter);
}

OntologyMapping parse_ontology(std::istream& in, char delimiter) {
  OntologyMapping out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) line = strip_bom(line);
    if (trim(line).empty()) continue;
    const auto fields = split_delimited(line, delimiter);
    if (fields.size() < 2) {
      out.warnings.push_back("ontology line " + std::to_string(line_no) + ": expected two columns");
      continue;
    }
    auto term = trim(fields[0]);
    auto group = trim(fields[1]);
    if (line_no == 1 && term == "term_id" && group == "group_id") continue;
    if (term.empty() || group.empty()) {
      out.warnings.push_back("ontology line " + std::to_string(line_no) + ": empty field");
      continue;
    }
    if (seen.insert({term, group}).second) out.pairs.emplace_back(std::move(term), std::move(group));
  }
  if (out.pairs.empty()) out.warnings.push_back("ontology mapping is empty; every AE will be isolated");
  return out;
}

namespace {
std::string quote_if_needed(const std::string& s, char delimiter) {
  if (s.find(delimiter) == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}
}  // namespace

void write_reports(std::ostream& out, const std::vector<ReportRecord>& records, const ReportSchema& schema) {
  const char d = schema.delimiter;
  out << schema.id_column << d << schema.vaccine_column;
  for (const auto& cov : schema.covariates) out << d << cov.column;
  for (const auto& f : schema.filter_columns) out << d << f;
  out << d << schema.ae_column << '\n';
  for (const auto& rec : records) {
    out << quote_if_needed(rec.report_id, d) << d << quote_if_needed(rec.vaccine_code, d);
    for (const auto& v : rec.covariates) out << d << quote_if_needed(v, d);
    for (const auto& v : rec.filter_values) out << d << quote_if_needed(v, d);
    std::string joined;
    for (std::size_t i = 0; i < rec.ae_terms.size(); ++i) {
      if (i) joined.push_back(schema.ae_delimiter);
      joined += rec.ae_terms[i];
    }
    out << d << quote_if_needed(joined, d) << '\n';
  }
}

void write_ontology(std::ostream& out, const OntologyMapping& mapping, char delimiter) {
  out << "term_id" << delimiter << "group_id\n";
  for (const auto& [term, group] : mapping.pairs) out << term << delimiter << group << '\n';
}

}  // namespace bgrass
