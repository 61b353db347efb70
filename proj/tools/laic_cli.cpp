// Command-line front end: run, suite, oracle, diagnose, report, validate.

#include "laic/laic.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace laic;
using namespace laic::harness;

enum ExitCode { kOk = 0, kConfig = 1, kNumerical = 2, kIo = 3 };

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::string out;
  int threads = 1;
};

ExperimentConfig load_with_overrides(const std::string& path, const Common& o) {
  ExperimentConfig c = load_config(path);
  if (o.seed) c.master_seed = *o.seed;
  if (o.replicates) c.replicates = *o.replicates;
  if (const auto problems = check_config(c); !problems.empty()) throw ConfigError(problems);
  return c;
}

int cmd_run(const std::string& path, const Common& o) {
  const auto c = load_with_overrides(path, o);
  auto res = run_experiment(c, o.threads);
  const fs::path dir = o.out.empty() ? fs::path("laic_run") : fs::path(o.out);
  save_store(res.store, res.manifest, dir);
  std::cout << "records " << res.store.record_count() << " replicates " << c.replicates << " hash "
            << res.manifest.config_hash << " -> " << dir.string() << "\n";
  if (res.manifest.partial) {
    for (const auto& f : res.manifest.failures) std::cerr << "failed: " << f << "\n";
    return kNumerical;
  }
  return kOk;
}

int cmd_suite(const std::string& path, const Common& o) {
  const auto c = load_with_overrides(path, o);
  const auto rep = run_table1_suite(c, o.threads);
  const fs::path dir = o.out.empty() ? fs::path("laic_suite") : fs::path(o.out);
  ensure_directory(dir);
  {
    auto out = open_output(dir / "fig9_profiles.csv");
    out << "scheme,component,mean_abs_increment\n";
    for (const auto& s : rep.schemes)
      for (int i = 0; i < s.mean_abs_increment.size(); ++i)
        out << s.name << ',' << i << ',' << format_double(s.mean_abs_increment[i]) << '\n';
  }
  auto j = rep.to_json();
  j["config_hash"] = config_hash(c);
  write_text_file(dir / "suite_summary.json", j.dump(2) + "\n");
  for (const auto& g : j["gaps"]) {
    std::cout << g["metric"].get<std::string>() << ": " << g["better"].get<std::string>() << " < "
              << g["worse"].get<std::string>() << " by " << g["gap"].get<double>() << " (se "
              << g["standard_error"].get<double>() << ")" << (g["significant"].get<bool>() ? "" : " not significant")
              << "\n";
  }
  return kOk;
}

int cmd_oracle(const std::string& path, const Common& o, int lags) {
  const auto c = load_with_overrides(path, o);
  const auto t = run_oracle(c, lags);
  const fs::path dir = o.out.empty() ? fs::path("laic_oracle") : fs::path(o.out);
  ensure_directory(dir);
  {
    auto out = open_output(dir / "oracle_lag_covariance.csv");
    out << "lag,row,col,covariance,time_mean_covariance\n";
    for (int k = 0; k <= lags; ++k) {
      const auto& m = t.result.lag_covariance[static_cast<std::size_t>(k)];
      const auto& tm = t.result.time_mean_lag_covariance[static_cast<std::size_t>(k)];
      for (int i = 0; i < m.rows(); ++i)
        for (int jj = 0; jj < m.cols(); ++jj)
          out << k << ',' << i << ',' << jj << ',' << format_double(m(i, jj)) << ',' << format_double(tm(i, jj)) << '\n';
    }
  }
  {
    auto out = open_output(dir / "oracle_phase_means.csv");
    out << "phase,component,mean_increment\n";
    for (int p = 0; p < t.result.period(); ++p) {
      const auto& v = t.result.phase_mean_increment[static_cast<std::size_t>(p)];
      for (int i = 0; i < v.size(); ++i) out << p << ',' << i << ',' << format_double(v[i]) << '\n';
    }
  }
  nlohmann::json j;
  j["config_hash"] = config_hash(c);
  j["contraction_spectral_radius"] = diag::spectral_radius(t.result.contraction);
  j["time_mean_trace"] = t.result.time_mean_trace_series().values;
  const double lag0 = t.result.lag_covariance[0].norm();
  j["lag1_over_lag0_frobenius"] = lag0 > 0.0 ? t.result.lag_covariance[1].norm() / lag0 : 0.0;
  if (t.lag1) {
    j["lag1_leading_relative_error"] = t.lag1->relative_error();
    j["lag1_leading_relative_bound"] = t.lag1->relative_bound();
  }
  write_text_file(dir / "oracle_summary.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_diagnose(const std::string& store_dir, int lags, std::optional<int> phase) {
  const auto store = load_store(store_dir);
  std::cout << diagnose_store(store, lags, phase.value_or(store.config.diurnal_period)).dump(2) << "\n";
  return kOk;
}

int cmd_report(const std::string& store_dir, const std::string& figs, const Common& o, int lags) {
  const auto store = load_store(store_dir);
  const auto manifest = load_manifest(store_dir);
  auto sel = ReportSelection::parse(figs);
  sel.kmax = lags;
  const fs::path dir = o.out.empty() ? fs::path(store_dir) : fs::path(o.out);
  for (const auto& p : emit_report(store, manifest, sel, dir)) std::cout << p << "\n";
  return kOk;
}

int cmd_validate(const std::string& path) {
  const auto res = validate_config(read_text_file(path));
  if (!res.ok()) {
    for (const auto& e : res.errors) std::cerr << path << ": " << e << "\n";
    return kConfig;
  }
  std::cout << "ok " << config_hash(*res.config) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagged analysis increment covariance laboratory"};
  app.require_subcommand(1);
  Common o;
  std::uint64_t seed = 0;
  int replicates = 0;
  app.add_option("--seed", seed, "Master seed override");
  app.add_option("--replicates", replicates, "Replicate count override")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--threads", o.threads, "Worker threads (does not change results)")->check(CLI::PositiveNumber);

  std::string config, store, figs;
  int lags = 6;
  int phase = 0;

  auto* run = app.add_subcommand("run", "Run a twin experiment and write a record store");
  run->add_option("config", config)->required();
  auto* suite = app.add_subcommand("suite", "Run the SC / restarted / cycled / diurnal comparison");
  suite->add_option("config", config)->required();
  auto* oracle = app.add_subcommand("oracle", "Exact increment moments for a linear KF config");
  oracle->add_option("config", config)->required();
  oracle->add_option("--lags", lags, "Largest lag")->check(CLI::NonNegativeNumber);
  auto* diagnose = app.add_subcommand("diagnose", "Print diagnostics of a record store");
  diagnose->add_option("store", store)->required();
  diagnose->add_option("--lags", lags, "Largest lag")->check(CLI::NonNegativeNumber);
  auto* phase_opt = diagnose->add_option("--phase", phase, "Phase period")->check(CLI::PositiveNumber);
  auto* report = app.add_subcommand("report", "Write figure datasets for a record store");
  report->add_option("store", store)->required();
  report->add_option("--figs", figs, "Comma list of fig1,fig3,fig9,fig11,fig12");
  report->add_option("--lags", lags, "Largest lag")->check(CLI::NonNegativeNumber);
  auto* validate = app.add_subcommand("validate", "Check a config file");
  validate->add_option("config", config)->required();

  for (auto* sub : {run, suite, oracle, diagnose, report, validate}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  if (app.count("--seed")) o.seed = seed;
  if (app.count("--replicates")) o.replicates = replicates;

  try {
    if (*run) return cmd_run(config, o);
    if (*suite) return cmd_suite(config, o);
    if (*oracle) return cmd_oracle(config, o, lags);
    if (*diagnose) return cmd_diagnose(store, lags, phase_opt->count() ? std::optional<int>(phase) : std::nullopt);
    if (*report) return cmd_report(store, figs, o, lags);
    if (*validate) return cmd_validate(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
