#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rct/model.hpp"
#include "rct/oracle.hpp"

namespace rct {

// A parsed CSV file: header plus rows of raw cells. Cells are kept verbatim
// so writing a table back out (e.g. after appending an assignment column)
// preserves the original bytes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  void append_column(const std::string& name, const std::vector<std::string>& cells);
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

// Cluster mode is triggered by the presence of a `cluster` column.
bool is_cluster_table(const CsvTable& table);

// Individual-level columns: y (required when require_outcome), d (0/1),
// stratum, pair, x1..xk. Errors name the offending data row and column.
Sample table_to_sample(const CsvTable& table, bool require_outcome);

// Cluster-level columns: y, d, cluster, cluster_size (= N_g, optional),
// stratum (optional). Per-cluster fields must be constant within a cluster.
ClusterSample table_to_cluster_sample(const CsvTable& table);

// Names of the covariate columns x1..xk in index order.
std::vector<std::string> covariate_columns(const CsvTable& table);

// Parses just the covariate block x1..xk (used by assignment generation,
// where no outcome or treatment column exists yet).
Eigen::MatrixXd table_covariates(const CsvTable& table);

// Serializes a sample with round-trip-exact numeric formatting; reading the
// result back yields an identical sample.
CsvTable sample_to_table(const Sample& sample);

// Schema-stable report serialization: exactly the keys
// {estimand, point, se, ci, level, n, method, variance_method, diagnostics,
//  warnings}.
nlohmann::json report_to_json(const EstimateReport& report);

// Declarative Monte Carlo scenarios for the `simulate` subcommand.
std::vector<McScenario> scenarios_from_json(const nlohmann::json& config);

std::string format_double(double value);

}  // namespace rct
