#include "rct/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rct/errors.hpp"

namespace rct {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

[[noreturn]] void cell_error(int row, const std::string& column, const std::string& what,
                             const std::string& value) {
  throw DataError("row " + std::to_string(row) + ", column '" + column + "': " + what +
                  (value.empty() ? "" : " (got '" + value + "')"));
}

double parse_double(const std::string& cell, int row, const std::string& column) {
  if (cell.empty()) cell_error(row, column, "missing value", "");
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) cell_error(row, column, "non-numeric field", cell);
  return value;
}

long long parse_integer(const std::string& cell, int row, const std::string& column) {
  if (cell.empty()) cell_error(row, column, "missing value", "");
  long long value = 0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) cell_error(row, column, "non-integer field", cell);
  return value;
}

int parse_treatment(const std::string& cell, int row) {
  const long long value = parse_integer(cell, row, "d");
  if (value != 0 && value != 1)
    cell_error(row, "d", "treatment not binary", cell);
  return static_cast<int>(value);
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

void CsvTable::append_column(const std::string& name,
                             const std::vector<std::string>& cells) {
  if (cells.size() != rows.size())
    throw DataError("append_column: one cell per row required");
  header.push_back(name);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].push_back(cells[i]);
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: header row required");
  table.header = split_line(line);
  if (table.header.empty()) throw DataError("empty header row");
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    auto cells = split_line(line);
    if (cells.size() != table.header.size())
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(table.header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file '" + path + "'");
  return read_csv(in);
}

void write_csv(std::ostream& out, const CsvTable& table) {
  for (std::size_t j = 0; j < table.header.size(); ++j)
    out << (j ? "," : "") << table.header[j];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
}

void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file '" + path + "' for writing");
  write_csv(out, table);
}

bool is_cluster_table(const CsvTable& table) { return table.column("cluster") >= 0; }

std::vector<std::string> covariate_columns(const CsvTable& table) {
  std::vector<std::pair<int, std::string>> found;
  for (const auto& name : table.header) {
    if (name.size() < 2 || name[0] != 'x') continue;
    bool digits = std::all_of(name.begin() + 1, name.end(),
                              [](char c) { return c >= '0' && c <= '9'; });
    if (digits) found.emplace_back(std::stoi(name.substr(1)), name);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> columns;
  for (std::size_t j = 0; j < found.size(); ++j) {
    if (found[j].first != static_cast<int>(j + 1))
      throw DataError("covariate columns must be named x1..xk; found '" +
                      found[j].second + "'");
    columns.push_back(found[j].second);
  }
  return columns;
}

Eigen::MatrixXd table_covariates(const CsvTable& table) {
  const auto x_names = covariate_columns(table);
  Eigen::MatrixXd x(table.rows.size(), x_names.size());
  for (std::size_t j = 0; j < x_names.size(); ++j) {
    const int column = table.column(x_names[j]);
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      x(static_cast<int>(i), static_cast<int>(j)) =
          parse_double(table.rows[i][column], static_cast<int>(i) + 1, x_names[j]);
  }
  return x;
}

Sample table_to_sample(const CsvTable& table, bool require_outcome) {
  const int y_col = table.column("y");
  const int d_col = table.column("d");
  if (require_outcome && y_col < 0) throw DataError("missing required column 'y'");
  if (d_col < 0) throw DataError("missing required column 'd'");
  const int stratum_col = table.column("stratum");
  const int pair_col = table.column("pair");
  const auto x_names = covariate_columns(table);

  Sample sample;
  const int n = static_cast<int>(table.rows.size());
  sample.y.resize(n, 0.0);
  sample.d.resize(n, 0);
  sample.x.resize(n, static_cast<int>(x_names.size()));
  if (stratum_col >= 0) sample.strata.resize(n);
  if (pair_col >= 0) sample.pair_ids.resize(n);
  std::vector<int> x_cols;
  for (const auto& name : x_names) x_cols.push_back(table.column(name));

  for (int i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    const int row_number = i + 1;
    if (y_col >= 0) sample.y[i] = parse_double(row[y_col], row_number, "y");
    sample.d[i] = parse_treatment(row[d_col], row_number);
    for (std::size_t j = 0; j < x_cols.size(); ++j)
      sample.x(i, static_cast<int>(j)) =
          parse_double(row[x_cols[j]], row_number, x_names[j]);
    if (stratum_col >= 0) {
      sample.strata[i] = row[stratum_col];
      if (sample.strata[i].empty())
        cell_error(row_number, "stratum", "missing stratum label", "");
    }
    if (pair_col >= 0)
      sample.pair_ids[i] =
          static_cast<int>(parse_integer(row[pair_col], row_number, "pair"));
  }
  return sample;
}

ClusterSample table_to_cluster_sample(const CsvTable& table) {
  const int y_col = table.column("y");
  const int d_col = table.column("d");
  const int cluster_col = table.column("cluster");
  if (y_col < 0) throw DataError("missing required column 'y'");
  if (d_col < 0) throw DataError("missing required column 'd'");
  if (cluster_col < 0) throw DataError("missing required column 'cluster'");
  const int size_col = table.column("cluster_size");
  const int stratum_col = table.column("stratum");

  ClusterSample clusters;
  std::map<long long, int> index_of;
  bool any_stratum = stratum_col >= 0;
  for (int i = 0; i < static_cast<int>(table.rows.size()); ++i) {
    const auto& row = table.rows[i];
    const int row_number = i + 1;
    const long long id = parse_integer(row[cluster_col], row_number, "cluster");
    const double y = parse_double(row[y_col], row_number, "y");
    const int d = parse_treatment(row[d_col], row_number);
    long long size = -1;
    if (size_col >= 0) size = parse_integer(row[size_col], row_number, "cluster_size");
    std::string stratum;
    if (any_stratum) {
      stratum = row[stratum_col];
      if (stratum.empty()) cell_error(row_number, "stratum", "missing stratum label", "");
    }

    auto it = index_of.find(id);
    if (it == index_of.end()) {
      index_of.emplace(id, clusters.size());
      clusters.ids.push_back(id);
      clusters.n_true.push_back(size >= 0 ? static_cast<int>(size) : -1);
      clusters.members.push_back({y});
      clusters.d.push_back(d);
      if (any_stratum) clusters.strata.push_back(stratum);
      continue;
    }
    const int g = it->second;
    clusters.members[g].push_back(y);
    if (clusters.d[g] != d)
      throw DataError("cluster " + std::to_string(id) +
                      ": treatment differs across its rows");
    if (size_col >= 0 && clusters.n_true[g] != static_cast<int>(size))
      throw DataError("cluster " + std::to_string(id) +
                      ": inconsistent cluster_size across its rows");
    if (any_stratum && clusters.strata[g] != stratum)
      throw DataError("cluster " + std::to_string(id) +
                      ": stratum differs across its rows");
  }
  // Without an explicit size column, N_g defaults to the sampled row count.
  for (int g = 0; g < clusters.size(); ++g)
    if (clusters.n_true[g] < 0) clusters.n_true[g] = clusters.m(g);
  ensure_valid(clusters);
  return clusters;
}

CsvTable sample_to_table(const Sample& sample) {
  CsvTable table;
  table.header = {"y", "d"};
  if (sample.has_strata()) table.header.push_back("stratum");
  if (sample.has_pairs()) table.header.push_back("pair");
  for (int j = 0; j < sample.k(); ++j)
    table.header.push_back("x" + std::to_string(j + 1));
  for (int i = 0; i < sample.n(); ++i) {
    std::vector<std::string> row = {format_double(sample.y[i]),
                                    std::to_string(sample.d[i])};
    if (sample.has_strata()) row.push_back(sample.strata[i]);
    if (sample.has_pairs()) row.push_back(std::to_string(sample.pair_ids[i]));
    for (int j = 0; j < sample.k(); ++j) row.push_back(format_double(sample.x(i, j)));
    table.rows.push_back(std::move(row));
  }
  return table;
}

nlohmann::json report_to_json(const EstimateReport& report) {
  nlohmann::json diagnostics(nlohmann::json::value_t::object);
  for (const auto& [key, value] : report.diagnostics) diagnostics[key] = value;
  for (const auto& [key, value] : report.variance_estimates)
    diagnostics["variance." + key] = value;
  return nlohmann::json{
      {"estimand", report.estimand},
      {"point", report.point},
      {"se", report.se},
      {"ci", {report.ci.first, report.ci.second}},
      {"level", report.level},
      {"n", report.n},
      {"method", report.method},
      {"variance_method", report.variance_method},
      {"diagnostics", diagnostics},
      {"warnings", report.warnings},
  };
}

namespace {

Poly poly_from_json(const nlohmann::json& node) {
  if (node.is_number()) return Poly{{node.get<double>()}};
  if (node.is_object() && node.contains("poly"))
    return Poly{node.at("poly").get<std::vector<double>>()};
  throw DataError("dgp: expected a number or {\"poly\": [...]} for a function of x");
}

Dgp dgp_from_json(const nlohmann::json& node) {
  Dgp dgp;
  const auto& x = node.at("x");
  const std::string type = x.at("type").get<std::string>();
  if (type == "discrete") {
    DiscreteX dx;
    dx.values = x.at("values").get<std::vector<double>>();
    dx.probs = x.at("probs").get<std::vector<double>>();
    dx.mean1 = node.at("mean1").get<std::vector<double>>();
    dx.mean0 = node.at("mean0").get<std::vector<double>>();
    dx.sd1 = node.at("sd1").get<std::vector<double>>();
    dx.sd0 = node.at("sd0").get<std::vector<double>>();
    if (node.contains("strata"))
      dx.strata = node.at("strata").get<std::vector<std::string>>();
    dgp.x = std::move(dx);
  } else if (type == "uniform") {
    UniformX ux;
    ux.lo = x.value("lo", 0.0);
    ux.hi = x.value("hi", 1.0);
    ux.mean1 = poly_from_json(node.at("mean1"));
    ux.mean0 = poly_from_json(node.at("mean0"));
    ux.sd1 = poly_from_json(node.at("sd1"));
    ux.sd0 = poly_from_json(node.at("sd0"));
    dgp.x = std::move(ux);
  } else {
    throw DataError("dgp: unknown covariate law '" + type + "'");
  }
  return dgp;
}

ClusterDgp cluster_dgp_from_json(const nlohmann::json& node) {
  ClusterDgp dgp;
  dgp.sizes = node.at("sizes").get<std::vector<int>>();
  dgp.probs = node.at("probs").get<std::vector<double>>();
  dgp.mean1 = node.at("mean1").get<std::vector<double>>();
  dgp.mean0 = node.at("mean0").get<std::vector<double>>();
  dgp.sd1 = node.value("sd1", 1.0);
  dgp.sd0 = node.value("sd0", 1.0);
  dgp.sampled = node.value("sampled", 0);
  return dgp;
}

DesignKind design_kind_from_string(const std::string& name) {
  if (name == "complete") return DesignKind::Complete;
  if (name == "sbr") return DesignKind::StratifiedBlock;
  if (name == "pairs") return DesignKind::MatchedPairs;
  if (name == "cluster-complete" || name == "cluster") return DesignKind::ClusterComplete;
  if (name == "cluster-sbr") return DesignKind::ClusterStratifiedBlock;
  throw DataError("unknown design kind '" + name + "'");
}

}  // namespace

std::vector<McScenario> scenarios_from_json(const nlohmann::json& config) {
  std::vector<McScenario> scenarios;
  for (const auto& node : config.at("scenarios")) {
    McScenario scenario;
    scenario.name = node.value("name", "scenario-" + std::to_string(scenarios.size()));
    const auto& dgp = node.at("dgp");
    if (dgp.contains("cluster"))
      scenario.dgp = cluster_dgp_from_json(dgp.at("cluster"));
    else
      scenario.dgp = dgp_from_json(dgp);
    const auto& design = node.at("design");
    scenario.design = design_kind_from_string(design.at("kind").get<std::string>());
    scenario.pi = design.value("pi", 0.5);
    if (design.contains("pi_by_stratum"))
      scenario.pi_by_stratum =
          design.at("pi_by_stratum").get<std::map<std::string, double>>();
    scenario.estimator = node.at("estimator").get<std::string>();
    scenario.variance = node.value("variance", "auto");
    scenario.aipw_model = node.value("aipw_model", "linear");
    scenario.n = node.at("n").get<int>();
    scenario.replications = node.at("replications").get<int>();
    scenario.seed = node.at("seed").get<std::uint64_t>();
    scenario.level = node.value("level", 0.95);
    scenarios.push_back(std::move(scenario));
  }
  return scenarios;
}

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace rct
