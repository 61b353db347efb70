#pragma once

#include "laic/diag/autocorrelation.hpp"
#include "laic/diag/statistics.hpp"
#include "laic/harness/experiment.hpp"

#include <set>

namespace laic::harness {

/// Per-replicate summaries of one scheme in the suite.
struct SchemeRun {
  std::string name;
  Vector mean_abs_increment;             // averaged over replicates
  std::vector<double> abs_increment;     // per replicate, over the target components
  std::vector<double> abs_r1;            // per replicate, mean over target components of |R_1|
  std::vector<double> abs_r2;
  std::vector<double> eta_error;         // per replicate, || mean eta_a - mean eta_true || on active components
  std::vector<Vector> mean_eta_a;
  std::vector<std::uint64_t> world_hash;
};

/// Paired comparison: gap = mean over replicates of (worse - better).
struct PairedGap {
  std::string metric;
  std::string better;
  std::string worse;
  double gap = 0.0;
  double standard_error = 0.0;
  int replicates = 0;

  /// Gap above twice its paired standard error.
  [[nodiscard]] bool significant() const { return gap > 2.0 * standard_error; }
};

inline PairedGap paired_gap(const std::string& metric, const SchemeRun& better, const std::vector<double>& b,
                            const SchemeRun& worse, const std::vector<double>& w) {
  if (b.size() != w.size() || b.empty()) throw DimensionError("paired samples differ in size");
  PairedGap g;
  g.metric = metric;
  g.better = better.name;
  g.worse = worse.name;
  g.replicates = static_cast<int>(b.size());
  std::vector<double> diff;
  for (std::size_t i = 0; i < b.size(); ++i) diff.push_back(w[i] - b[i]);
  for (double x : diff) g.gap += x;
  g.gap /= static_cast<double>(diff.size());
  if (diff.size() > 1) {
    double ss = 0.0;
    for (double x : diff) ss += (x - g.gap) * (x - g.gap);
    g.standard_error = std::sqrt(ss / static_cast<double>(diff.size() - 1) / static_cast<double>(diff.size()));
  }
  return g;
}

struct Table1Report {
  std::vector<int> target_components;
  std::vector<int> active_components;
  std::vector<SchemeRun> schemes;  // sc, restarted, cycled, diurnal
  bool shared_world = true;

  [[nodiscard]] const SchemeRun& scheme(const std::string& name) const {
    for (const auto& s : schemes)
      if (s.name == name) return s;
    throw Error("no scheme named " + name);
  }

  /// Relative change (percent) of the replicate-mean metric against SC.
  [[nodiscard]] double relative_change(const std::string& name, std::vector<double> SchemeRun::*metric) const {
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    const double ref = mean(scheme("sc4dvar").*metric);
    return 100.0 * (mean(scheme(name).*metric) - ref) / ref;
  }

  [[nodiscard]] nlohmann::json to_json() const;
};

/// The four Table-1 configurations derived from a base config. WC settings
/// (mask, Q, lag) are taken from the base when it is a WC config.
inline std::vector<ExperimentConfig> table1_configs(const ExperimentConfig& base) {
  da::WeakConstraintScheme wc;
  if (const auto* b = std::get_if<da::WeakConstraintScheme>(&base.scheme)) {
    wc = *b;
  } else {
    wc.active_mask.assign(static_cast<std::size_t>(base.dimension), true);
    wc.Q = IsotropicCovariance{1.0, 0.0, Kernel::gaussian};
  }
  std::vector<ExperimentConfig> out;
  ExperimentConfig sc = base;
  sc.scheme = da::StrongConstraintScheme{};
  out.push_back(sc);
  for (auto strategy : {da::CyclingStrategy::restarted, da::CyclingStrategy::cycled,
                        da::CyclingStrategy::diurnally_cycled}) {
    ExperimentConfig c = base;
    wc.strategy = strategy;
    c.scheme = wc;
    out.push_back(c);
  }
  return out;
}

/// Components that are observed and carry a deterministic truth error; all
/// observed components when there is none.
inline std::vector<int> biased_observed_components(const ExperimentConfig& c) {
  const obs::ObservationOperator H(c.obs_network, c.dimension);
  const std::set<int> observed(H.indices().begin(), H.indices().end());
  Vector magnitude = Vector::Zero(c.dimension);
  for (const auto& t : c.truth_error.terms) {
    if (const auto* b = std::get_if<ConstantBias>(&t)) magnitude += b->bias.cwiseAbs();
    if (const auto* di = std::get_if<DiurnalError>(&t)) magnitude += di->amplitude.cwiseAbs();
  }
  std::vector<int> out, all;
  for (int i : observed) {
    all.push_back(i);
    if (magnitude[i] > 0.0) out.push_back(i);
  }
  return out.empty() ? all : out;
}

/// Runs SC, Restarted, Cycled and Diurnally cycled on identical truth and
/// observation realizations and reduces each replicate to paired metrics.
inline Table1Report run_table1_suite(const ExperimentConfig& base, int threads = 1) {
  if (const auto problems = check_config(base); !problems.empty()) throw ConfigError(problems);
  const auto configs = table1_configs(base);
  for (const auto& c : configs)
    if (const auto problems = check_config(c); !problems.empty()) throw ConfigError(problems);

  Table1Report rep;
  rep.target_components = biased_observed_components(base);
  const auto& wc = std::get<da::WeakConstraintScheme>(configs[1].scheme);
  for (int i = 0; i < base.dimension; ++i)
    if (wc.active_mask[static_cast<std::size_t>(i)]) rep.active_components.push_back(i);

  const int R = base.replicates;
  const int n_schemes = static_cast<int>(configs.size());
  rep.schemes.resize(configs.size());
  for (int s = 0; s < n_schemes; ++s) {
    auto& run = rep.schemes[static_cast<std::size_t>(s)];
    run.name = da::scheme_name(configs[static_cast<std::size_t>(s)].scheme);
    run.abs_increment.assign(static_cast<std::size_t>(R), 0.0);
    run.abs_r1.assign(static_cast<std::size_t>(R), 0.0);
    run.abs_r2.assign(static_cast<std::size_t>(R), 0.0);
    run.eta_error.assign(static_cast<std::size_t>(R), 0.0);
    run.mean_eta_a.assign(static_cast<std::size_t>(R), Vector::Zero(base.dimension));
    run.world_hash.assign(static_cast<std::size_t>(R), 0);
  }
  std::vector<Vector> profiles(static_cast<std::size_t>(n_schemes * R));

  parallel_for(n_schemes * R, threads, [&](int job) {
    const int s = job / R;
    const int r = job % R;
    const auto& c = configs[static_cast<std::size_t>(s)];
    auto& run = rep.schemes[static_cast<std::size_t>(s)];
    diag::IncrementSeries series;
    Vector eta_a_sum = Vector::Zero(c.dimension), eta_true_sum = Vector::Zero(c.dimension);
    const auto hash = run_replicate(c, r, [&](const WindowData& w, const da::AssimilationCycleRecord& rec) {
      if (rec.cycle_index < c.spinup) return;
      series.cycles.push_back(rec.cycle_index);
      series.values.push_back(rec.increment);
      eta_a_sum += rec.eta_a;
      eta_true_sum += w.eta;
    });
    const auto ru = static_cast<std::size_t>(r);
    run.world_hash[ru] = hash;
    if (series.length() < 3) return;
    const Vector mabs = diag::mean_abs_profile(series);
    profiles[static_cast<std::size_t>(job)] = mabs;
    double acc = 0.0;
    for (int i : rep.target_components) acc += mabs[i];
    run.abs_increment[ru] = acc / static_cast<double>(rep.target_components.size());
    const auto ac = diag::component_mean_abs_autocorrelation(series, 2, rep.target_components);
    run.abs_r1[ru] = ac.values[1];
    run.abs_r2[ru] = ac.values[2];
    const Vector eta_a = eta_a_sum / series.length();
    const Vector eta_t = eta_true_sum / series.length();
    run.mean_eta_a[ru] = eta_a;
    double e2 = 0.0;
    for (int i : rep.active_components) e2 += (eta_a[i] - eta_t[i]) * (eta_a[i] - eta_t[i]);
    run.eta_error[ru] = std::sqrt(e2);
  });

  for (int s = 0; s < n_schemes; ++s) {
    auto& run = rep.schemes[static_cast<std::size_t>(s)];
    run.mean_abs_increment = Vector::Zero(base.dimension);
    int used = 0;
    for (int r = 0; r < R; ++r) {
      const auto& p = profiles[static_cast<std::size_t>(s * R + r)];
      if (p.size()) {
        run.mean_abs_increment += p;
        ++used;
      }
      if (run.world_hash[static_cast<std::size_t>(r)] != rep.schemes[0].world_hash[static_cast<std::size_t>(r)]) {
        rep.shared_world = false;
      }
    }
    if (used) run.mean_abs_increment /= used;
  }
  if (!rep.shared_world) throw Error("table-1 suite: schemes saw different truth/observation streams");
  return rep;
}

inline nlohmann::json Table1Report::to_json() const {
  nlohmann::json j;
  j["target_components"] = target_components;
  j["active_components"] = active_components;
  j["shared_world"] = shared_world;
  for (const auto& s : schemes) {
    nlohmann::json e;
    e["mean_abs_increment_profile"] = std::vector<double>(s.mean_abs_increment.data(),
                                                          s.mean_abs_increment.data() + s.mean_abs_increment.size());
    e["abs_increment"] = s.abs_increment;
    e["abs_r1"] = s.abs_r1;
    e["abs_r2"] = s.abs_r2;
    e["eta_error"] = s.eta_error;
    e["relative_change_abs_r1_percent"] = relative_change(s.name, &SchemeRun::abs_r1);
    e["relative_change_abs_r2_percent"] = relative_change(s.name, &SchemeRun::abs_r2);
    e["relative_change_abs_increment_percent"] = relative_change(s.name, &SchemeRun::abs_increment);
    j["schemes"][s.name] = e;
  }
  auto gap_json = [](const PairedGap& g) {
    return nlohmann::json{{"metric", g.metric}, {"better", g.better},       {"worse", g.worse},
                          {"gap", g.gap},       {"standard_error", g.standard_error}, {"significant", g.significant()}};
  };
  const auto& sc = scheme("sc4dvar");
  const auto& rs = scheme("wc4dvar-restarted");
  const auto& cy = scheme("wc4dvar-cycled");
  const auto& di = scheme("wc4dvar-diurnal");
  j["gaps"].push_back(gap_json(paired_gap("abs_increment", cy, cy.abs_increment, rs, rs.abs_increment)));
  j["gaps"].push_back(gap_json(paired_gap("abs_increment", rs, rs.abs_increment, sc, sc.abs_increment)));
  j["gaps"].push_back(gap_json(paired_gap("abs_r1", di, di.abs_r1, cy, cy.abs_r1)));
  j["gaps"].push_back(gap_json(paired_gap("abs_r2", di, di.abs_r2, cy, cy.abs_r2)));
  j["gaps"].push_back(gap_json(paired_gap("eta_error", cy, cy.eta_error, rs, rs.eta_error)));
  return j;
}

}  // namespace laic::harness
