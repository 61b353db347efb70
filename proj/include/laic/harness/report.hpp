#pragma once

#include "laic/diag/autocorrelation.hpp"
#include "laic/diag/laic.hpp"
#include "laic/diag/statistics.hpp"
#include "laic/harness/store_io.hpp"

#include <set>

namespace laic::harness {

struct ComponentGroup {
  std::string name;
  std::vector<int> components;
};

/// all / observed / unobserved (empty groups dropped).
inline std::vector<ComponentGroup> component_groups(const ExperimentConfig& c) {
  const obs::ObservationOperator H(c.obs_network, c.dimension);
  std::set<int> seen(H.indices().begin(), H.indices().end());
  ComponentGroup all{"all", {}}, observed{"observed", {}}, unobserved{"unobserved", {}};
  for (int i = 0; i < c.dimension; ++i) {
    all.components.push_back(i);
    (seen.count(i) ? observed : unobserved).components.push_back(i);
  }
  std::vector<ComponentGroup> out{all, observed};
  if (!unobserved.components.empty()) out.push_back(unobserved);
  return out;
}

inline std::vector<diag::Variable> store_variables(const ExperimentConfig& c) {
  if (std::holds_alternative<da::WeakConstraintScheme>(c.scheme)) {
    return {diag::Variable::increment, diag::Variable::eta_a};
  }
  return {diag::Variable::increment};
}

/// Component-averaged R_k per replicate, then averaged over replicates that
/// are not degenerate. Empty if every replicate is degenerate or too short.
inline std::optional<diag::LagCovarianceSeries> store_autocorrelogram(const RecordStore& store, diag::Variable v,
                                                                      const std::vector<int>& comps, int kmax) {
  diag::LagCovarianceSeries acc;
  int used = 0;
  for (const auto& rep : store.replicates) {
    if (static_cast<int>(rep.records.size()) <= kmax || rep.records.size() < 2) continue;
    try {
      const auto s = diag::component_mean_autocorrelation(diag::series_from_records(rep.records, v), kmax, comps);
      if (used == 0) {
        acc = s;
      } else {
        for (int k = 0; k <= kmax; ++k) acc.values[k] += s.values[k];
      }
      ++used;
    } catch (const diag::DegenerateSeries&) {
    }
  }
  if (used == 0) return std::nullopt;
  for (double& x : acc.values) x /= used;
  return acc;
}

/// Phase means pooled over replicates.
inline diag::PhaseMeans store_phase_means(const RecordStore& store, int period) {
  diag::IncrementSeries pooled;
  for (const auto& rep : store.replicates) {
    const auto s = diag::series_from_records(rep.records);
    pooled.cycles.insert(pooled.cycles.end(), s.cycles.begin(), s.cycles.end());
    pooled.values.insert(pooled.values.end(), s.values.begin(), s.values.end());
  }
  return diag::mean_increment_by_phase(pooled, period);
}

inline std::vector<da::AssimilationCycleRecord> pooled_records(const RecordStore& store) {
  std::vector<da::AssimilationCycleRecord> out;
  for (const auto& rep : store.replicates) out.insert(out.end(), rep.records.begin(), rep.records.end());
  return out;
}

inline nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

/// Text-mode summary used by the `diagnose` subcommand.
inline nlohmann::json diagnose_store(const RecordStore& store, int kmax, int period) {
  nlohmann::json j;
  j["records"] = store.record_count();
  j["replicates"] = store.replicates.size();
  if (store.record_count() == 0) return j;
  for (const auto v : store_variables(store.config)) {
    for (const auto& g : component_groups(store.config)) {
      if (const auto ac = store_autocorrelogram(store, v, g.components, kmax)) {
        j["autocorrelation"][diag::variable_name(v)][g.name] = ac->values;
      }
    }
  }
  const auto& first = store.replicates.front();
  if (first.records.size() >= 30) {
    const auto series = diag::series_from_records(first.records);
    nlohmann::json w = nlohmann::json::array();
    for (int i = 0; i < series.dim(); ++i) {
      try {
        const auto res = diag::whiteness_test(series.component(i), kmax);
        w.push_back({{"component", i}, {"flagged_lags", res.flag_count()}, {"ljung_box", res.ljung_box},
                     {"dof", res.degrees_of_freedom}});
      } catch (const diag::DegenerateSeries&) {
      }
    }
    j["whiteness_replicate0"] = w;
    for (int k = 0; k <= kmax && k < series.length(); ++k) {
      j["laic_time_mean_trace"].push_back(diag::laic_time_mean(series, k).matrix.trace());
    }
  }
  if (store.record_count() >= static_cast<std::size_t>(period)) {
    const auto pm = store_phase_means(store, period);
    for (int p = 0; p < period; ++p) j["phase_means"].push_back(to_json(pm.mean[static_cast<std::size_t>(p)]));
  }
  return j;
}

struct ReportSelection {
  bool fig1 = false, fig3 = false, fig9 = false, fig11 = false, fig12 = false;
  int kmax = 6;

  [[nodiscard]] bool empty() const { return !(fig1 || fig3 || fig9 || fig11 || fig12); }

  static ReportSelection parse(const std::string& list) {
    ReportSelection s;
    for (const auto& f : split_list(list)) {
      if (f.empty()) continue;
      if (f == "fig1") s.fig1 = true;
      else if (f == "fig3") s.fig3 = true;
      else if (f == "fig9") s.fig9 = true;
      else if (f == "fig11") s.fig11 = true;
      else if (f == "fig12") s.fig12 = true;
      else throw ConfigError("unknown figure '" + f + "' (fig1, fig3, fig9, fig11, fig12)");
    }
    return s;
  }
};

/// Writes the selected figure datasets and summary.json into `dir` and the
/// manifest alongside them. An empty selection writes the manifest only.
inline std::vector<std::string> emit_report(const RecordStore& store, RunManifest manifest,
                                            const ReportSelection& sel, const fs::path& dir) {
  ensure_directory(dir);
  std::vector<std::string> written;
  if (!sel.empty()) {
    nlohmann::json summary;
    summary["config_hash"] = manifest.config_hash;
    summary["records"] = store.record_count();
    const auto records = pooled_records(store);

    if (sel.fig1) {
      const fs::path p = dir / "fig1_autocorrelogram.csv";
      auto out = open_output(p);
      out << "lag,variable,component_group,R_k\n";
      for (const auto v : store_variables(store.config)) {
        for (const auto& g : component_groups(store.config)) {
          const auto ac = store_autocorrelogram(store, v, g.components, sel.kmax);
          if (!ac) continue;
          for (int k = 0; k <= sel.kmax; ++k) {
            out << k << ',' << diag::variable_name(v) << ',' << g.name << ',' << format_double(ac->values[k]) << '\n';
          }
          summary["fig1"][diag::variable_name(v)][g.name] = ac->values;
        }
      }
      written.push_back(p.string());
    }
    if (sel.fig3 && !records.empty()) {
      const fs::path p = dir / "fig3_phase_means.csv";
      auto out = open_output(p);
      out << "phase,component,mean,stderr,count\n";
      const auto pm = store_phase_means(store, store.config.diurnal_period);
      for (int ph = 0; ph < pm.period; ++ph) {
        const auto s = static_cast<std::size_t>(ph);
        for (int i = 0; i < pm.mean[s].size(); ++i) {
          out << ph << ',' << i << ',' << format_double(pm.mean[s][i]) << ',' << format_double(pm.standard_error[s][i])
              << ',' << pm.count[s] << '\n';
        }
        summary["fig3"]["phase_means"].push_back(to_json(pm.mean[s]));
      }
      written.push_back(p.string());
    }
    if (sel.fig9 && !records.empty()) {
      const fs::path p = dir / "fig9_profiles.csv";
      auto out = open_output(p);
      out << "component,mean_abs_increment,stddev_increment,mean_eta_a\n";
      const auto series = diag::series_from_records(records);
      const Vector mabs = diag::mean_abs_profile(series);
      const Vector sd = diag::increment_stddev(records);
      const Vector eta = diag::mean_abs_profile(diag::series_from_records(records, diag::Variable::eta_a));
      Vector eta_mean = Vector::Zero(store.config.dimension);
      for (const auto& r : records) eta_mean += r.eta_a;
      eta_mean /= static_cast<double>(records.size());
      for (int i = 0; i < mabs.size(); ++i) {
        out << i << ',' << format_double(mabs[i]) << ',' << format_double(sd[i]) << ',' << format_double(eta_mean[i])
            << '\n';
      }
      summary["fig9"]["mean_abs_increment"] = to_json(mabs);
      summary["fig9"]["mean_abs_eta_a"] = to_json(eta);
      written.push_back(p.string());
    }
    if (sel.fig11 && !records.empty()) {
      const fs::path p = dir / "fig11_lengthscales.csv";
      if (store.config.dimension < 8) {
        summary["fig11"]["skipped"] = "length scales need dimension >= 8";
      } else {
        auto out = open_output(p);
        out << "replicate,cycle,length_scale\n";
        double acc = 0.0;
        int used = 0;
        for (const auto& rep : store.replicates) {
          for (const auto& r : rep.records) {
            const auto ls = diag::spatial_length_scale(r.increment);
            out << rep.replicate << ',' << r.cycle_index << ',' << (ls ? format_double(*ls) : "") << '\n';
            if (ls) {
              acc += *ls;
              ++used;
            }
          }
        }
        summary["fig11"]["time_mean_grid_units"] = used ? acc / used : std::numeric_limits<double>::quiet_NaN();
        summary["fig11"]["snapshots_used"] = used;
        written.push_back(p.string());
      }
    }
    if (sel.fig12 && !records.empty()) {
      const fs::path p = dir / "fig12_departures.csv";
      auto out = open_output(p);
      out << "component,omb_mean,omb_std,oma_mean,oma_std\n";
      const auto omb = diag::departure_statistics(records, diag::DepartureSplit::o_minus_b);
      const auto oma = diag::departure_statistics(records, diag::DepartureSplit::o_minus_a);
      const obs::ObservationOperator H(store.config.obs_network, store.config.dimension);
      for (int r = 0; r < omb.mean.size(); ++r) {
        out << H.indices()[static_cast<std::size_t>(r)] << ',' << format_double(omb.mean[r]) << ','
            << format_double(omb.stddev[r]) << ',' << format_double(oma.mean[r]) << ','
            << format_double(oma.stddev[r]) << '\n';
      }
      summary["fig12"]["omb_std"] = to_json(omb.stddev);
      summary["fig12"]["oma_std"] = to_json(oma.stddev);
      written.push_back(p.string());
    }
    const fs::path sp = dir / "summary.json";
    write_text_file(sp, summary.dump(2) + "\n");
    written.push_back(sp.string());
  }
  const fs::path mp = dir / kManifestFile;
  manifest.outputs.insert(manifest.outputs.end(), written.begin(), written.end());
  manifest.outputs.push_back(mp.string());
  write_text_file(mp, manifest.to_json().dump(2) + "\n");
  written.push_back(mp.string());
  return written;
}

}  // namespace laic::harness
