#pragma once

// Report/ontology file parsing and binomial aggregation by covariate stratum.

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bgrass {

// Fatal input/configuration problem (missing file, missing column, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CovariateSpec {
  std::string column;
  // Empty: categorical. Otherwise the value is numeric and binned by these
  // ascending thresholds into breaks.size() + 1 ordered groups.
  std::vector<double> breaks;
  // Reference level for dummy coding; defaults to the first level in
  // canonical order (lowest bin, or lexicographically smallest label).
  std::optional<std::string> reference;
};

struct ReportSchema {
  char delimiter = ',';
  std::string id_column = "report_id";
  std::string vaccine_column = "vaccine";
  // Raw vaccine code -> 0 (control) / 1 (target).
  std::map<std::string, int> vaccine_codes{{"0", 0}, {"1", 1}};
  std::vector<CovariateSpec> covariates;
  // Extra columns retained only for exclusion rules.
  std::vector<std::string> filter_columns;
  std::string ae_column = "ae_terms";
  char ae_delimiter = ';';
};

struct ReportRecord {
  std::string report_id;
  std::string vaccine_code;
  int vaccine = 0;
  // Raw values, one per schema covariate, in schema order.
  std::vector<std::string> covariates;
  // Raw values, one per schema filter column.
  std::vector<std::string> filter_values;
  // Sorted, de-duplicated term ids.
  std::vector<std::string> ae_terms;
};

struct ParseDiagnostic {
  std::size_t line = 0;
  std::string message;
};

struct ParsedReports {
  std::vector<ReportRecord> records;
  std::vector<ParseDiagnostic> diagnostics;
  std::vector<std::string> warnings;
};

// Throws ConfigError when the file is unreadable or a declared column is absent.
ParsedReports parse_reports(const std::string& path, const ReportSchema& schema);
ParsedReports parse_reports(std::istream& in, const ReportSchema& schema);

struct ExclusionRule {
  enum class Op { kLess, kLessEqual, kGreater, kGreaterEqual, kEqual, kNotEqual };
  std::string column;
  Op op = Op::kEqual;
  std::string value;

  // Parses "age < 18", "multi_vaccine == 1", ...
  static ExclusionRule parse(const std::string& text);
  std::string to_string() const;
};

struct FilterOptions {
  int min_ae_count = 25;
  std::vector<ExclusionRule> exclusions;
};

struct Stratum {
  // Level index per covariate (0 = reference).
  std::vector<int> levels;
  int vaccine = 0;
  int trials = 0;
};

struct StratifiedCells {
  std::vector<std::string> ae_vocabulary;
  std::vector<std::string> covariate_names;
  // Canonically ordered level labels per covariate; index 0 is the reference.
  std::vector<std::vector<std::string>> covariate_levels;
  // "(intercept)" followed by one "column=level" dummy per non-reference level.
  std::vector<std::string> design_columns;
  std::vector<Stratum> strata;
  Eigen::MatrixXd design;   // S x (p + 1)
  Eigen::VectorXd vaccine;  // S, entries in {0, 1}
  Eigen::VectorXi trials;   // S
  Eigen::MatrixXi events;   // S x J

  int num_strata() const { return static_cast<int>(trials.size()); }
  int num_aes() const { return static_cast<int>(events.cols()); }
  int num_predictors() const { return static_cast<int>(design.cols()); }
  long long total_trials() const { return trials.cast<long long>().sum(); }
};

struct StratifySummary {
  std::size_t reports_in = 0;
  std::size_t reports_excluded = 0;
  std::size_t reports_without_modeled_ae = 0;
  std::size_t aes_dropped = 0;
};

// Index of the bin holding value: 0 below breaks[0], breaks.size() at or above the last.
int bin_index(double value, const std::vector<double>& breaks);

// Throws ConfigError when every AE is filtered out or no report survives.
StratifiedCells filter_and_stratify(const std::vector<ReportRecord>& records, const ReportSchema& schema,
                                    const FilterOptions& options, StratifySummary* summary = nullptr);

// Build cells directly from matrices (design must already include the intercept column).
StratifiedCells make_cells(Eigen::MatrixXd design, Eigen::VectorXd vaccine, Eigen::VectorXi trials,
                           Eigen::MatrixXi events, std::vector<std::string> ae_vocabulary = {});

struct OntologyMapping {
  // De-duplicated (term, group) pairs in first-seen order.
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> warnings;
};

// Two-column (term_id, group_id) file; an optional "term_id,group_id" header is skipped.
OntologyMapping parse_ontology(const std::string& path, char delimiter = ',');
OntologyMapping parse_ontology(std::istream& in, char delimiter = ',');

// Split one delimited line, honoring double-quoted fields. Strips a trailing '\r'.
std::vector<std::string> split_delimited(const std::string& line, char delimiter);

// Writers for the same formats the parsers consume.
void write_reports(std::ostream& out, const std::vector<ReportRecord>& records, const ReportSchema& schema);
void write_ontology(std::ostream& out, const OntologyMapping& mapping, char delimiter = ',');

}  // namespace bgrass
