// Command-line surface: assignment generation, analysis, randomization tests,
// and Monte Carlo simulation for randomized experiments.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rct/design.hpp"
#include "rct/errors.hpp"
#include "rct/estimate.hpp"
#include "rct/io.hpp"
#include "rct/model.hpp"
#include "rct/oracle.hpp"
#include "rct/permute.hpp"
#include "rct/rng.hpp"
#include "rct/variance.hpp"

namespace {

using nlohmann::json;

std::map<std::string, double> parse_share_map(const std::string& spec) {
  std::map<std::string, double> shares;
  if (spec.empty()) return shares;
  std::istringstream stream(spec);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw rct::MismatchError("--pi-by-stratum expects label=value pairs");
    shares[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return shares;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw rct::DataError("cannot open file '" + path + "' for writing");
  out << text;
}

// ---------------------------------------------------------------------------
// assign
// ---------------------------------------------------------------------------

struct AssignOptions {
  std::string design;
  double pi = 0.5;
  std::string pi_by_stratum;
  std::uint64_t seed = 0;
  std::string in, out;
};

int run_assign(const AssignOptions& opt) {
  rct::CsvTable table = rct::read_csv_file(opt.in);
  const int n = static_cast<int>(table.rows.size());
  rct::Rng rng(opt.seed);
  const auto shares = parse_share_map(opt.pi_by_stratum);

  std::vector<std::string> d_cells(n);
  auto fill_d = [&](const std::vector<int>& d) {
    for (int i = 0; i < n; ++i) d_cells[i] = std::to_string(d[i]);
  };

  if (opt.design == "complete") {
    fill_d(rct::assign_complete(n, opt.pi, rng).d);
    table.append_column("d", d_cells);
  } else if (opt.design == "sbr") {
    const int stratum_col = table.column("stratum");
    if (stratum_col < 0)
      throw rct::MismatchError("--design sbr requires a 'stratum' column");
    std::vector<std::string> strata(n);
    std::map<std::string, double> share_map = shares;
    for (int i = 0; i < n; ++i) {
      strata[i] = table.rows[i][stratum_col];
      share_map.emplace(strata[i], opt.pi);
    }
    fill_d(rct::assign_stratified_block(strata, share_map, rng).d);
    table.append_column("d", d_cells);
  } else if (opt.design == "pairs") {
    const Eigen::MatrixXd covariates = rct::table_covariates(table);
    if (covariates.cols() < 1)
      throw rct::MismatchError("--design pairs requires covariate columns x1..xk");
    const auto pairing = rct::match_pairs(covariates);
    const rct::Assignment assignment = rct::assign_matched_pairs(pairing, rng);
    std::vector<std::string> pair_cells(n);
    for (std::size_t j = 0; j < pairing.size(); ++j) {
      pair_cells[pairing[j].first] = std::to_string(j);
      pair_cells[pairing[j].second] = std::to_string(j);
    }
    fill_d(assignment.d);
    table.append_column("d", d_cells);
    table.append_column("pair", pair_cells);
  } else if (opt.design == "cluster") {
    const int cluster_col = table.column("cluster");
    if (cluster_col < 0)
      throw rct::MismatchError("--design cluster requires a 'cluster' column");
    const int stratum_col = table.column("stratum");
    rct::ClusterSample clusters;
    std::map<long long, int> index_of;
    std::vector<int> row_cluster(n);
    for (int i = 0; i < n; ++i) {
      const long long id = std::stoll(table.rows[i][cluster_col]);
      auto it = index_of.find(id);
      if (it == index_of.end()) {
        it = index_of.emplace(id, clusters.size()).first;
        clusters.ids.push_back(id);
        clusters.n_true.push_back(1);
        clusters.members.push_back({0.0});
        clusters.d.push_back(0);
        if (stratum_col >= 0) clusters.strata.push_back(table.rows[i][stratum_col]);
      }
      row_cluster[i] = it->second;
    }
    rct::DesignSpec spec;
    spec.kind = stratum_col >= 0 ? rct::DesignKind::ClusterStratifiedBlock
                                 : rct::DesignKind::ClusterComplete;
    spec.pi = opt.pi;
    spec.pi_by_stratum = shares;
    spec.seed = opt.seed;
    const rct::Assignment assignment = rct::assign_clusters(clusters, spec, rng);
    for (int i = 0; i < n; ++i)
      d_cells[i] = std::to_string(assignment.d[row_cluster[i]]);
    table.append_column("d", d_cells);
  } else {
    throw rct::MismatchError("unknown design '" + opt.design + "'");
  }

  rct::write_csv_file(opt.out, table);
  return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
  std::string estimator;
  std::string variance = "auto";
  double level = 0.95;
  std::string in, out;
  std::optional<double> pi;
  std::string pi_by_stratum;
  std::string aipw_model = "linear";
};

struct VarianceSpec {
  std::string method;
  long finite_pop_n = -1;
  bool improved = false;
};

VarianceSpec parse_variance_spec(std::string text) {
  VarianceSpec spec;
  if (text.rfind("finite-pop", 0) == 0) {
    spec.method = "finite-pop";
    text.erase(0, std::string("finite-pop").size());
    if (!text.empty() && text[0] == ':') {
      text.erase(0, 1);
      const auto comma = text.find(',');
      spec.finite_pop_n = std::stol(text.substr(0, comma));
      text = comma == std::string::npos ? "" : text.substr(comma);
    }
    if (text == ",improved")
      spec.improved = true;
    else if (!text.empty())
      throw rct::MismatchError("malformed finite-pop variance spec");
    return spec;
  }
  spec.method = text;
  return spec;
}

int run_analyze(const AnalyzeOptions& opt) {
  const rct::CsvTable table = rct::read_csv_file(opt.in);
  rct::EstimateReport report;
  report.level = opt.level;

  if (rct::is_cluster_table(table)) {
    const rct::ClusterSample clusters = rct::table_to_cluster_sample(table);
    VarianceSpec vspec = parse_variance_spec(
        opt.variance == "auto"
            ? rct::auto_variance_method(opt.estimator, false, false, true)
            : opt.variance);

    std::map<std::string, double> variances;
    std::vector<std::string> warnings;
    double point = 0.0;
    std::string estimand;
    if (opt.estimator == "cluster-eq") {
      point = rct::cluster_eq(clusters);
      estimand = "Delta_eq";
    } else if (opt.estimator == "cluster-size") {
      point = rct::cluster_size(clusters);
      estimand = "Delta_size";
    } else if (opt.estimator == "dim") {
      point = rct::flattened_diff_in_means(clusters);
      estimand = "ATE";
      warnings.push_back(
          "individual-row difference in means on clustered data converges to the "
          "sample-weighted effect, not Delta_eq or Delta_size");
    } else {
      throw rct::MismatchError("estimator '" + opt.estimator +
                               "' is not available for cluster data");
    }

    if (vspec.method == "cluster-eq") {
      variances["cluster-eq"] = rct::cluster_eq_variance(clusters);
    } else if (vspec.method == "cluster-size") {
      variances["cluster-size"] = rct::cluster_size_variance(clusters, opt.pi);
    } else if (vspec.method == "robust") {
      std::vector<double> y;
      std::vector<int> d;
      for (int g = 0; g < clusters.size(); ++g)
        for (double value : clusters.members[g]) {
          y.push_back(value);
          d.push_back(clusters.d[g]);
        }
      variances["robust"] = rct::arm_robust_variance(y, d);
      warnings.push_back("arm-robust SE on clustered rows ignores "
                         "within-cluster correlation");
    } else {
      throw rct::MismatchError("variance method '" + vspec.method +
                               "' is not available for cluster data");
    }
    report = rct::make_report(estimand, point, variances, vspec.method, opt.level,
                              clusters.size(), opt.estimator);
    report.warnings = warnings;
    report.diagnostics["clusters"] = clusters.size();
    report.diagnostics["treated_clusters"] = clusters.treated_count();
    write_text(opt.out, rct::report_to_json(report).dump(2) + "\n");
    return 0;
  }

  const rct::Sample sample = rct::table_to_sample(table, /*require_outcome=*/true);
  rct::ensure_valid(sample);
  const int n = sample.n();
  const double realized_share = static_cast<double>(sample.n_treated()) / n;
  std::vector<std::string> warnings;

  double pi = opt.pi.value_or(realized_share);
  const auto explicit_shares = parse_share_map(opt.pi_by_stratum);
  // Share map for stratified methods: explicit entries win, then --pi, then
  // the realized within-stratum share.
  std::map<std::string, double> shares = explicit_shares;
  if (sample.has_strata()) {
    std::map<std::string, std::pair<int, int>> counts;
    for (int i = 0; i < n; ++i) {
      auto& cell = counts[sample.strata[i]];
      ++cell.first;
      if (sample.d[i] == 1) ++cell.second;
    }
    for (const auto& [label, cell] : counts) {
      const double fallback = opt.pi ? *opt.pi
                                     : static_cast<double>(cell.second) / cell.first;
      shares.emplace(label, fallback);
    }
  }

  double point = 0.0;
  rct::FittedWorkingModel fitted;
  if (opt.estimator == "dim") {
    point = rct::diff_in_means(sample);
  } else if (opt.estimator == "sat") {
    point = rct::saturated_estimate(sample);
  } else if (opt.estimator == "pooled") {
    point = rct::pooled_adjusted(sample);
  } else if (opt.estimator == "lin") {
    point = rct::lin_interacted(sample);
    fitted = rct::working_models::linear().fit(sample);
  } else if (opt.estimator == "aipw") {
    fitted = rct::working_models::by_name(opt.aipw_model).fit(sample);
    point = rct::aipw(sample, pi, fitted);
    if (!opt.pi)
      warnings.push_back("aipw: design share --pi not supplied; realized treated "
                         "share used");
    else if (rct::aipw_pi_mismatch(sample, pi))
      warnings.push_back("aipw: supplied --pi differs from the realized treated "
                         "share by more than 1/n");
  } else {
    throw rct::MismatchError("unknown estimator '" + opt.estimator + "'");
  }

  VarianceSpec vspec = parse_variance_spec(
      opt.variance == "auto"
          ? rct::auto_variance_method(opt.estimator, sample.has_strata(),
                                      sample.has_pairs(), false)
          : opt.variance);

  std::map<std::string, double> variances;
  if (vspec.method == "robust") {
    variances["robust"] = rct::arm_robust_variance(sample);
    if (sample.has_strata() || sample.has_pairs())
      warnings.push_back("arm-robust SE is generally conservative under "
                         "stratified or matched-pairs designs");
  } else if (vspec.method == "sbr") {
    variances["sbr"] = rct::sbr_variance(sample, shares);
  } else if (vspec.method == "strat-fp") {
    variances["strat-fp"] = rct::design_based_strat_variance(sample, shares);
    warnings.push_back("design-based SE is valid only when the sample is the "
                       "entire population of interest");
  } else if (vspec.method == "pairs") {
    variances["pairs"] = rct::matched_pairs_variance(sample);
  } else if (vspec.method == "pooled-robust") {
    variances["pooled-robust"] = rct::pooled_robust_variance(sample);
  } else if (vspec.method == "influence") {
    if (!fitted.mu) fitted = rct::working_models::linear().fit(sample);
    variances["influence"] = rct::adjusted_influence_variance(sample, pi, fitted);
    if (!opt.pi && opt.estimator != "lin")
      warnings.push_back("influence SE: design share --pi not supplied; realized "
                         "treated share used");
  } else if (vspec.method == "finite-pop") {
    const long population = vspec.finite_pop_n > 0 ? vspec.finite_pop_n : n;
    const std::string key =
        vspec.improved ? "finite-pop-improved" : "finite-pop";
    variances[key] = rct::finite_pop_bound(sample, population, vspec.improved);
    vspec.method = key;
  } else {
    throw rct::MismatchError("unknown variance method '" + vspec.method + "'");
  }
  if (vspec.method != "robust" && sample.n_treated() >= 2 && sample.n_control() >= 2)
    variances.emplace("robust", rct::arm_robust_variance(sample));

  report = rct::make_report("ATE", point, variances, vspec.method, opt.level, n,
                            opt.estimator);
  report.warnings = warnings;
  report.diagnostics["n_treated"] = sample.n_treated();
  report.diagnostics["realized_share"] = realized_share;
  report.diagnostics["pi_used"] = pi;
  if (sample.has_strata()) {
    for (const auto& [label, value] : rct::imbalance(sample.d, sample.strata))
      report.diagnostics["imb." + label] = value;
  }
  write_text(opt.out, rct::report_to_json(report).dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

struct TestOptions {
  std::string design;
  double pi = 0.5;
  std::string pi_by_stratum;
  std::string stat = "dim";
  int B = 999;
  std::uint64_t seed = 0;
  bool exhaustive = false;
  std::string in, out, ref_out;
};

int run_test(const TestOptions& opt) {
  const rct::CsvTable table = rct::read_csv_file(opt.in);
  const rct::Sample sample = rct::table_to_sample(table, /*require_outcome=*/true);
  rct::ensure_valid(sample);

  rct::DesignSpec design;
  if (opt.design == "complete")
    design.kind = rct::DesignKind::Complete;
  else if (opt.design == "sbr")
    design.kind = rct::DesignKind::StratifiedBlock;
  else if (opt.design == "pairs")
    design.kind = rct::DesignKind::MatchedPairs;
  else
    throw rct::MismatchError("permutation test supports designs complete, sbr, pairs");
  design.pi = opt.pi;
  design.pi_by_stratum = parse_share_map(opt.pi_by_stratum);
  design.seed = opt.seed;

  rct::Rng rng(opt.seed);
  const rct::PermutationResult result =
      rct::permutation_test(sample, design, opt.stat, opt.B, rng, opt.exhaustive);

  json out{
      {"p_value", result.p_value},
      {"statistic", result.statistic},
      {"observed", result.observed},
      {"draws", result.draws},
      {"exhaustive", result.exhaustive},
  };
  write_text(opt.out, out.dump(2) + "\n");
  if (!opt.ref_out.empty()) {
    std::ostringstream ref;
    ref << "statistic\n";
    for (double value : result.reference) ref << rct::format_double(value) << "\n";
    write_text(opt.ref_out, ref.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::string config, out;
  std::string format = "csv";
};

int run_simulate(const SimulateOptions& opt) {
  std::ifstream in(opt.config);
  if (!in) throw rct::DataError("cannot open config '" + opt.config + "'");
  json config;
  in >> config;

  std::vector<rct::McReport> reports;
  for (const auto& scenario : rct::scenarios_from_json(config))
    reports.push_back(rct::monte_carlo(scenario));

  if (opt.format == "json") {
    json rows = json::array();
    for (const auto& r : reports) {
      rows.push_back(json{{"name", r.name},
                          {"design", r.design},
                          {"estimator", r.estimator},
                          {"variance", r.variance},
                          {"n", r.n},
                          {"replications", r.replications},
                          {"target", r.target},
                          {"mean_estimate", r.mean_estimate},
                          {"bias", r.bias},
                          {"mcse_bias", r.mcse_bias},
                          {"emp_variance", r.emp_variance},
                          {"mcse_emp_variance", r.mcse_emp_variance},
                          {"mean_variance_estimate", r.mean_variance_estimate},
                          {"coverage", r.coverage},
                          {"mcse_coverage", r.mcse_coverage}});
    }
    write_text(opt.out, rows.dump(2) + "\n");
    return 0;
  }
  if (opt.format != "csv")
    throw rct::MismatchError("--format must be csv or json");

  std::ostringstream table;
  table << "name,design,estimator,variance,n,replications,target,mean_estimate,"
           "bias,mcse_bias,emp_variance,mcse_emp_variance,mean_variance_estimate,"
           "coverage,mcse_coverage\n";
  char buffer[512];
  for (const auto& r : reports) {
    std::snprintf(buffer, sizeof(buffer),
                  "%s,%s,%s,%s,%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,"
                  "%.12g,%.12g\n",
                  r.name.c_str(), r.design.c_str(), r.estimator.c_str(),
                  r.variance.c_str(), r.n, r.replications, r.target, r.mean_estimate,
                  r.bias, r.mcse_bias, r.emp_variance, r.mcse_emp_variance,
                  r.mean_variance_estimate, r.coverage, r.mcse_coverage);
    table << buffer;
  }
  write_text(opt.out, table.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Assignment, analysis, and simulation for randomized experiments"};
  app.require_subcommand(1);

  AssignOptions assign_opt;
  auto* assign = app.add_subcommand("assign", "Generate a treatment assignment");
  assign->add_option("--design", assign_opt.design, "complete|sbr|pairs|cluster")
      ->required();
  assign->add_option("--pi", assign_opt.pi, "assignment share (default 0.5)");
  assign->add_option("--pi-by-stratum", assign_opt.pi_by_stratum, "label=share,...");
  assign->add_option("--seed", assign_opt.seed, "RNG seed")->required();
  assign->add_option("--in", assign_opt.in, "input CSV")->required();
  assign->add_option("--out", assign_opt.out, "output CSV")->required();

  AnalyzeOptions analyze_opt;
  auto* analyze = app.add_subcommand("analyze", "Estimate a treatment effect");
  analyze->add_option("--estimator", analyze_opt.estimator,
                      "dim|sat|pooled|lin|aipw|cluster-eq|cluster-size")
      ->required();
  analyze->add_option("--variance", analyze_opt.variance,
                      "auto|robust|sbr|strat-fp|pairs|cluster-eq|cluster-size|"
                      "pooled-robust|influence|finite-pop[:N][,improved]");
  analyze->add_option("--level", analyze_opt.level, "confidence level (default 0.95)");
  analyze->add_option("--in", analyze_opt.in, "input CSV")->required();
  analyze->add_option("--out", analyze_opt.out, "output JSON (default stdout)");
  double pi_flag = -1.0;
  auto* pi_option = analyze->add_option("--pi", pi_flag, "design assignment share");
  analyze->add_option("--pi-by-stratum", analyze_opt.pi_by_stratum, "label=share,...");
  analyze->add_option("--aipw-model", analyze_opt.aipw_model, "zero|arm-mean|linear");

  TestOptions test_opt;
  auto* test = app.add_subcommand("test", "Randomization test of the sharp null");
  test->add_option("--design", test_opt.design, "complete|sbr|pairs")->required();
  test->add_option("--pi", test_opt.pi, "assignment share (default 0.5)");
  test->add_option("--pi-by-stratum", test_opt.pi_by_stratum, "label=share,...");
  test->add_option("--stat", test_opt.stat, "dim|dim-studentized");
  test->add_option("--B", test_opt.B, "number of resampled assignments");
  test->add_option("--seed", test_opt.seed, "RNG seed");
  test->add_flag("--exhaustive", test_opt.exhaustive,
                 "enumerate all assignments (count <= 10^6)");
  test->add_option("--in", test_opt.in, "input CSV")->required();
  test->add_option("--out", test_opt.out, "output JSON (default stdout)");
  test->add_option("--ref-out", test_opt.ref_out, "CSV of the reference distribution");

  SimulateOptions simulate_opt;
  auto* simulate = app.add_subcommand("simulate", "Run Monte Carlo scenarios");
  simulate->add_option("--config", simulate_opt.config, "JSON scenario config")
      ->required();
  simulate->add_option("--out", simulate_opt.out, "output path (default stdout)");
  simulate->add_option("--format", simulate_opt.format, "csv|json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*assign) return run_assign(assign_opt);
    if (*analyze) {
      if (pi_option->count() > 0) analyze_opt.pi = pi_flag;
      return run_analyze(analyze_opt);
    }
    if (*test) return run_test(test_opt);
    if (*simulate) return run_simulate(simulate_opt);
  } catch (const rct::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  } catch (const rct::MismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
