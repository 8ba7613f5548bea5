// mortgee: GEE mortality modelling, selection and forecasting CLI.
//
// Subcommands: fit, compare, forecast, simulate. Every run writes a
// run_manifest.toml with the fully resolved configuration and the input's
// SHA-256; re-running with `--config run_manifest.toml` reproduces the
// outputs byte for byte.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mortgee/csv.hpp"
#include "mortgee/dataio.hpp"
#include "mortgee/design.hpp"
#include "mortgee/errors.hpp"
#include "mortgee/forecast.hpp"
#include "mortgee/gee.hpp"
#include "mortgee/manifest.hpp"
#include "mortgee/selection.hpp"
#include "mortgee/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string input;
  std::string layout = "long";
  mortgee::CsvSchema schema;
  std::string mx_country = "POP";
  std::string mx_series = "all";
  std::string population_mode = "single";
  std::vector<std::string> corstr;
  bool weighted = false;
  std::string ages;
  std::string train;
  std::string years;  // simulate span
  int horizon = 1;
  std::string interval = "prediction";
  bool kt_drift_var = false;
  std::string cohort_center = "auto";
  bool no_cohort = false;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::string exec = "parallel";
  double tol = 1e-8;
  int max_iter = 50;
  // simulate
  int sim_countries = 1;
  int sim_genders = 2;
  std::string sim_corr = "exchangeable";
  double sim_rho = 0.3;
  double sim_sigma = 0.05;
  double sim_kt_start = 0.0;
  double sim_kt_drift = -0.025;
  double sim_kt_sigma = 0.005;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::pair<int, int>> parse_range(const std::string& s, const char* flag) {
  if (s.empty()) return std::nullopt;
  const auto pos = s.find(':');
  if (pos == std::string::npos)
    throw UsageError(std::string(flag) + " expects A:B, got '" + s + "'");
  try {
    const int lo = std::stoi(s.substr(0, pos));
    const int hi = std::stoi(s.substr(pos + 1));
    if (lo > hi) throw UsageError(std::string(flag) + " range is inverted: " + s);
    return std::make_pair(lo, hi);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError(std::string(flag) + " expects integer bounds, got '" + s + "'");
  }
}

void add_io_options(CLI::App* cmd, Options& o, bool input_required) {
  auto* in = cmd->add_option("--input", o.input, "Input data file");
  if (input_required) in->required();
  cmd->add_option("--layout", o.layout, "Input layout")
      ->check(CLI::IsMember({"long", "mx"}));
  cmd->add_option("--col-country", o.schema.country, "Column name for country");
  cmd->add_option("--col-gender", o.schema.gender, "Column name for gender");
  cmd->add_option("--col-year", o.schema.year, "Column name for year");
  cmd->add_option("--col-age", o.schema.age, "Column name for age");
  cmd->add_option("--col-rate", o.schema.rate, "Column name for rate");
  cmd->add_option("--col-exposure", o.schema.exposure, "Column name for exposure");
  cmd->add_option("--country", o.mx_country, "Country label for mx-layout input");
  cmd->add_option("--mx-series", o.mx_series, "Which mx series to melt")
      ->check(CLI::IsMember({"female", "male", "total", "all"}));
}

void add_model_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--population-mode", o.population_mode, "single or multi")
      ->check(CLI::IsMember({"single", "multi"}));
  cmd->add_option("--corstr", o.corstr, "Working correlation structure (repeatable)")
      ->check(CLI::IsMember({"independence", "exchangeable", "ar1", "unstructured"}));
  cmd->add_flag("--weighted", o.weighted, "Weight rows by exposure/mean(exposure)");
  cmd->add_option("--ages", o.ages, "Training age range A:B (inclusive)");
  cmd->add_option("--train", o.train, "Training year range Y0:Y1 (inclusive)");
  cmd->add_option("--cohort-center", o.cohort_center,
                  "Cohort centering constant, or 'auto' for the training mean");
  cmd->add_flag("--no-cohort", o.no_cohort, "Drop the age:cohort term");
  cmd->add_option("--tol", o.tol, "Convergence tolerance on coefficients");
  cmd->add_option("--max-iter", o.max_iter, "Maximum GEE iterations")
      ->check(CLI::Range(1, 100000));
  cmd->add_option("--exec", o.exec, "Kernel execution policy")
      ->check(CLI::IsMember({"serial", "parallel"}));
}

void add_out_option(CLI::App* cmd, Options& o) {
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->set_config("--config", "", "Read options from a TOML-style config file");
}

mortgee::ModelSpec make_spec(const Options& o) {
  mortgee::ModelSpec spec;
  const auto mode = mortgee::population_mode_from_string(o.population_mode);
  if (!mode) throw UsageError("unknown population mode " + o.population_mode);
  spec.population_mode = *mode;
  if (!o.corstr.empty()) {
    const auto kind = mortgee::correlation_kind_from_string(o.corstr.front());
    if (!kind) throw UsageError("unknown correlation structure " + o.corstr.front());
    spec.correlation = *kind;
  }
  spec.weighted = o.weighted;
  if (const auto ages = parse_range(o.ages, "--ages")) spec.age_range = *ages;
  else spec.age_range = {0, 200};
  if (const auto train = parse_range(o.train, "--train")) spec.train_years = *train;
  else spec.train_years = {0, 9999};
  if (o.cohort_center != "auto") {
    try {
      spec.cohort_centering = std::stod(o.cohort_center);
    } catch (const std::exception&) {
      throw UsageError("--cohort-center expects a number or 'auto'");
    }
  }
  spec.include_cohort = !o.no_cohort;
  return spec;
}

std::vector<mortgee::MortalityRecord> load_records(const Options& o,
                                                   const mortgee::ModelSpec& spec) {
  mortgee::RecordFilter filter;
  filter.ages = spec.age_range;
  filter.years = spec.train_years;
  if (o.layout == "mx") {
    mortgee::MxSeries series = mortgee::MxSeries::all;
    if (o.mx_series == "female") series = mortgee::MxSeries::female;
    else if (o.mx_series == "male") series = mortgee::MxSeries::male;
    else if (o.mx_series == "total") series = mortgee::MxSeries::total;
    return mortgee::load_mx(o.input, o.mx_country, series, filter);
  }
  return mortgee::load_csv(o.input, o.schema, filter);
}

mortgee::FitOptions make_fit_options(const Options& o, bool error_on_no_convergence) {
  mortgee::FitOptions fo;
  fo.tol = o.tol;
  fo.max_iter = o.max_iter;
  fo.exec = o.exec == "serial" ? mortgee::kernels::Exec::serial
                               : mortgee::kernels::Exec::parallel;
  fo.error_on_no_convergence = error_on_no_convergence;
  return fo;
}

std::string structure_label(mortgee::CorrelationKind kind) {
  switch (kind) {
    case mortgee::CorrelationKind::independence: return "geeInd";
    case mortgee::CorrelationKind::exchangeable: return "geeEx";
    case mortgee::CorrelationKind::ar1: return "geeAr1";
    case mortgee::CorrelationKind::unstructured: return "geeUns";
  }
  return "?";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) mortgee::fail(mortgee::errc::io, path.string());
  return os;
}

void write_manifest(const fs::path& out_dir, CLI::App* cmd, const std::string& name,
                    const Options& o, bool with_input) {
  auto os = open_out(out_dir / "run_manifest.toml");
  os << "# mortgee run manifest; pass as --config to `mortgee " << name
     << "` for an identical rerun\n";
  os << "# subcommand: " << name << '\n';
  os << "# version: " << kVersion << '\n';
  if (with_input) os << "# input_sha256: " << mortgee::sha256_file(o.input) << '\n';
  os << cmd->config_to_str(true, false);
}

json rho_to_json(const mortgee::WorkingCorrelation& corr) {
  if (corr.kind == mortgee::CorrelationKind::unstructured) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < corr.rho_matrix.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < corr.rho_matrix.cols(); ++j)
        row.push_back(corr.rho_matrix(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  }
  return corr.rho;
}

void write_fit_outputs(const fs::path& out_dir, const mortgee::GeeFit& fit,
                       const mortgee::DesignMatrix& design) {
  {
    auto os = open_out(out_dir / "coefficients.csv");
    os << "term,estimate,se_naive,se_robust\n";
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
      os << fit.terms[static_cast<std::size_t>(j)] << ','
         << mortgee::csv::fmt17(fit.beta(j)) << ','
         << mortgee::csv::fmt17(fit.se_naive(j)) << ','
         << mortgee::csv::fmt17(fit.se_robust(j)) << '\n';
  }
  {
    json stats;
    stats["correlation"] = mortgee::to_string(fit.kind);
    stats["phi"] = fit.phi;
    stats["rho"] = rho_to_json(fit.corr);
    stats["iterations"] = fit.iterations;
    stats["converged"] = fit.converged;
    stats["quasi_lik"] = fit.quasi_lik;
    stats["n_obs"] = fit.n_obs;
    stats["n_params"] = fit.n_params;
    stats["cohort_center"] = design.layout.cohort_center;
    auto os = open_out(out_dir / "fitstats.json");
    os << stats.dump(2) << '\n';
  }
}

struct Pipeline {
  mortgee::ModelSpec spec;
  mortgee::PanelDataset panel{};
  mortgee::KtSeries kt;
  mortgee::DesignMatrix design;
};

Pipeline build_pipeline(const Options& o) {
  Pipeline pl;
  pl.spec = make_spec(o);
  const auto records = load_records(o, pl.spec);
  pl.panel = mortgee::to_panel(records, pl.spec);
  pl.kt = mortgee::compute_kt(pl.panel);
  pl.design = mortgee::build_design(pl.panel, pl.kt, pl.spec);
  std::cout << "design: " << pl.design.n() << " rows, " << pl.design.p()
            << " columns, " << pl.panel.n_clusters() << " clusters\n";
  return pl;
}

int run_fit(CLI::App* cmd, Options& o) {
  if (o.corstr.empty()) o.corstr = {"exchangeable"};
  if (o.corstr.size() > 1) throw UsageError("fit takes exactly one --corstr");
  const fs::path out_dir(o.out_dir);
  fs::create_directories(out_dir);

  auto pl = build_pipeline(o);
  const auto fit = mortgee::fit(pl.design, pl.spec.correlation, make_fit_options(o, true));
  write_fit_outputs(out_dir, fit, pl.design);
  write_manifest(out_dir, cmd, "fit", o, true);

  std::cout << "converged=" << (fit.converged ? "true" : "false")
            << " iterations=" << fit.iterations << " phi=" << mortgee::csv::fmt3(fit.phi);
  if (fit.kind == mortgee::CorrelationKind::exchangeable ||
      fit.kind == mortgee::CorrelationKind::ar1)
    std::cout << " rho=" << mortgee::csv::fmt3(fit.corr.rho);
  std::cout << '\n' << "wrote " << (out_dir / "coefficients.csv").string() << '\n';
  return 0;
}

/// Fits every requested structure; hard failures become unranked rows so
/// the rest of the table still renders.
std::vector<mortgee::CriteriaRow> compare_structures(
    const Options& o, const Pipeline& pl, const std::vector<std::string>& structures,
    std::string* selected) {
  std::vector<std::pair<std::string, mortgee::GeeFit>> fits;
  std::vector<mortgee::CriteriaRow> failed;
  for (const auto& name : structures) {
    const auto kind = *mortgee::correlation_kind_from_string(name);
    const std::string label = structure_label(kind);
    try {
      fits.emplace_back(label, mortgee::fit(pl.design, kind, make_fit_options(o, false)));
    } catch (const mortgee::Error& err) {
      std::cerr << "warning: " << label << " failed: " << err.code() << ": "
                << err.what() << '\n';
      mortgee::CriteriaRow row;
      row.model_label = label;
      row.converged = false;
      row.params = static_cast<int>(pl.design.p());
      row.qic = row.qicu = row.quasi_lik = row.cic = row.qicc =
          std::numeric_limits<double>::quiet_NaN();
      failed.push_back(std::move(row));
    }
  }

  auto rows = mortgee::compare(pl.design, fits);
  rows.insert(rows.end(), failed.begin(), failed.end());

  if (selected) {
    selected->clear();
    for (const auto& row : rows)
      if (row.converged) {
        *selected = row.model_label;
        break;
      }
  }
  return rows;
}

int run_compare(CLI::App* cmd, Options& o) {
  if (o.corstr.size() < 2) throw UsageError("compare needs at least two --corstr values");
  std::vector<std::string> structures;
  for (const auto& s : o.corstr) {
    if (std::find(structures.begin(), structures.end(), s) != structures.end()) {
      std::cerr << "warning: duplicate --corstr " << s << " ignored\n";
      continue;
    }
    structures.push_back(s);
  }

  const fs::path out_dir(o.out_dir);
  fs::create_directories(out_dir);
  auto pl = build_pipeline(o);

  std::string selected;
  const auto rows = compare_structures(o, pl, structures, &selected);

  open_out(out_dir / "criteria.csv") << mortgee::render_criteria_csv(rows);
  write_manifest(out_dir, cmd, "compare", o, true);

  std::cout << mortgee::render_criteria_text(rows);
  if (selected.empty())
    mortgee::fail(mortgee::errc::no_convergence, "no structure converged");
  std::cout << "selected: " << selected << '\n';
  return 0;
}

int run_forecast(CLI::App* cmd, Options& o) {
  if (o.corstr.empty()) o.corstr = {"exchangeable"};
  const auto mode = mortgee::interval_mode_from_string(o.interval);
  if (!mode) throw UsageError("unknown interval mode " + o.interval);

  const fs::path out_dir(o.out_dir);
  fs::create_directories(out_dir);
  auto pl = build_pipeline(o);

  // With several candidate structures, rank them by QIC first.
  std::string structure = o.corstr.front();
  if (o.corstr.size() > 1) {
    std::vector<std::string> structures;
    for (const auto& s : o.corstr)
      if (std::find(structures.begin(), structures.end(), s) == structures.end())
        structures.push_back(s);
    std::string selected;
    const auto rows = compare_structures(o, pl, structures, &selected);
    open_out(out_dir / "criteria.csv") << mortgee::render_criteria_csv(rows);
    if (selected.empty())
      mortgee::fail(mortgee::errc::no_convergence, "no structure converged");
    for (const auto& s : structures)
      if (structure_label(*mortgee::correlation_kind_from_string(s)) == selected)
        structure = s;
    std::cout << "selected: " << selected << '\n';
  }

  const auto kind = *mortgee::correlation_kind_from_string(structure);
  const auto fit = mortgee::fit(pl.design, kind, make_fit_options(o, true));

  const auto rw = mortgee::fit_rw_drift(pl.kt);
  const auto ktf = mortgee::forecast_kt(rw, o.horizon, o.kt_drift_var);

  mortgee::FutureRequest req;
  req.years = ktf.years;
  const auto x_future = mortgee::future_design(pl.design, req, ktf.series());

  std::vector<double> kt_var;
  if (*mode == mortgee::IntervalMode::prediction_kt) {
    kt_var.reserve(static_cast<std::size_t>(x_future.n()));
    for (const auto& row : x_future.rows) {
      const auto it = std::find(ktf.years.begin(), ktf.years.end(), row.year);
      kt_var.push_back(ktf.variances[static_cast<std::size_t>(it - ktf.years.begin())]);
    }
  }

  const auto table = mortgee::predict(fit, x_future, kt_var, 0.95, *mode);

  {
    auto os = open_out(out_dir / "forecast.csv");
    mortgee::write_forecast_csv(os, table);
  }
  {
    auto os = open_out(out_dir / "kt.csv");
    os << "year,kt,var,phase\n";
    for (std::size_t i = 0; i < pl.kt.years.size(); ++i)
      os << pl.kt.years[i] << ',' << mortgee::csv::fmt17(pl.kt.values[i]) << ",0,train\n";
    for (std::size_t i = 0; i < ktf.years.size(); ++i)
      os << ktf.years[i] << ',' << mortgee::csv::fmt17(ktf.values[i]) << ','
         << mortgee::csv::fmt17(ktf.variances[i]) << ",forecast\n";
  }
  write_manifest(out_dir, cmd, "forecast", o, true);

  std::cout << "forecast: " << table.rows.size() << " rows for years "
            << ktf.years.front() << ".." << ktf.years.back() << " (structure "
            << structure << ", interval " << o.interval << ")\n"
            << "wrote " << (out_dir / "forecast.csv").string() << '\n';
  return 0;
}

int run_simulate(CLI::App* cmd, Options& o) {
  mortgee::sim::SimConfig sc;
  if (o.sim_countries < 1 || o.sim_countries > 99)
    throw UsageError("--sim-countries must be in 1..99");
  if (o.sim_genders < 1 || o.sim_genders > 2)
    throw UsageError("--sim-genders must be 1 or 2");
  sc.countries.clear();
  for (int i = 0; i < o.sim_countries; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "C%02d", i + 1);
    sc.countries.emplace_back(buf);
  }
  sc.genders = o.sim_genders == 1 ? std::vector<std::string>{"m"}
                                  : std::vector<std::string>{"f", "m"};
  if (const auto ages = parse_range(o.ages, "--ages")) sc.ages = *ages;
  if (const auto years = parse_range(o.years, "--years")) sc.years = *years;
  const auto corr = mortgee::correlation_kind_from_string(o.sim_corr);
  if (!corr) throw UsageError("unknown --sim-corr " + o.sim_corr);
  sc.noise_corr = *corr;
  sc.rho = o.sim_rho;
  sc.sigma = o.sim_sigma;
  sc.kt_start = o.sim_kt_start;
  sc.kt_drift = o.sim_kt_drift;
  sc.kt_sigma = o.sim_kt_sigma;
  sc.seed = o.seed;

  const auto records = mortgee::sim::simulate(sc);

  const fs::path out_dir(o.out_dir);
  fs::create_directories(out_dir);
  {
    auto os = open_out(out_dir / "simulated.csv");
    mortgee::write_records_csv(os, records);
  }
  write_manifest(out_dir, cmd, "simulate", o, false);
  std::cout << "simulated " << records.size() << " records -> "
            << (out_dir / "simulated.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GEE mortality modelling: fit, model selection and forecasting"};
  app.require_subcommand(1);

  Options o;

  auto* fit_cmd = app.add_subcommand("fit", "Fit one GEE model and write coefficients");
  add_io_options(fit_cmd, o, true);
  add_model_options(fit_cmd, o);
  add_out_option(fit_cmd, o);

  auto* compare_cmd =
      app.add_subcommand("compare", "Fit several correlation structures and rank by QIC");
  add_io_options(compare_cmd, o, true);
  add_model_options(compare_cmd, o);
  add_out_option(compare_cmd, o);

  auto* forecast_cmd =
      app.add_subcommand("forecast", "Fit, extrapolate k_t and write prediction intervals");
  add_io_options(forecast_cmd, o, true);
  add_model_options(forecast_cmd, o);
  forecast_cmd->add_option("--horizon", o.horizon, "Forecast horizon in years")
      ->required()
      ->check(CLI::Range(1, 1000));
  forecast_cmd->add_option("--interval", o.interval, "Interval mode")
      ->check(CLI::IsMember({"mean", "prediction", "prediction+kt"}));
  forecast_cmd->add_flag("--kt-drift-var", o.kt_drift_var,
                         "Add drift-estimation variance to the k_t forecast variance");
  add_out_option(forecast_cmd, o);

  auto* simulate_cmd =
      app.add_subcommand("simulate", "Generate a synthetic mortality panel");
  simulate_cmd->add_option("--seed", o.seed, "RNG seed")->required();
  simulate_cmd->add_option("--ages", o.ages, "Age range A:B");
  simulate_cmd->add_option("--years", o.years, "Year span Y0:Y1");
  simulate_cmd->add_option("--sim-countries", o.sim_countries, "Number of countries");
  simulate_cmd->add_option("--sim-genders", o.sim_genders, "Number of genders (1 or 2)");
  simulate_cmd->add_option("--sim-corr", o.sim_corr, "Within-series noise structure")
      ->check(CLI::IsMember({"independence", "exchangeable", "ar1"}));
  simulate_cmd->add_option("--sim-rho", o.sim_rho, "Within-series noise correlation");
  simulate_cmd->add_option("--sim-sigma", o.sim_sigma, "Noise sd on the log scale");
  simulate_cmd->add_option("--sim-kt-start", o.sim_kt_start, "k_t starting value");
  simulate_cmd->add_option("--sim-kt-drift", o.sim_kt_drift, "k_t drift per year");
  simulate_cmd->add_option("--sim-kt-sigma", o.sim_kt_sigma, "k_t innovation sd");
  add_out_option(simulate_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_cmd, o);
    if (compare_cmd->parsed()) return run_compare(compare_cmd, o);
    if (forecast_cmd->parsed()) return run_forecast(forecast_cmd, o);
    if (simulate_cmd->parsed()) return run_simulate(simulate_cmd, o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const mortgee::Error& e) {
    std::cerr << e.code() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "E_INTERNAL: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
