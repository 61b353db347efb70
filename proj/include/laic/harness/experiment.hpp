#pragma once

#include "laic/da/cycling.hpp"
#include "laic/harness/config.hpp"
#include "laic/model_error.hpp"
#include "laic/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <functional>
#include <mutex>
#include <thread>

namespace laic::harness {

/// One window of the simulated world: truth states at every model step and
/// the observation batches drawn from them.
struct WindowData {
  long cycle = 0;
  Vector eta;  // true per-step tendency of this window
  Trajectory truth;
  std::vector<obs::ObservationBatch> batches;
};

/// Truth and observations for one replicate. Only the truth, truth-noise and
/// observation streams are consumed here, so every scheme run on the same
/// (seed, replicate) sees a bit-identical world.
class TwinWorld {
 public:
  TwinWorld(const ExperimentConfig& c, int replicate)
      : dyn_(c.dynamics),
        grid_(c.grid()),
        steps_(c.window_steps()),
        obs_times_(c.effective_obs_times()),
        H_(c.obs_network, c.dimension),
        R_(H_.observation_covariance(c.R, c.grid())),
        truth_rng_(c.master_seed, static_cast<std::uint64_t>(replicate), StreamId::truth),
        noise_rng_(c.master_seed, static_cast<std::uint64_t>(replicate), StreamId::truth_noise),
        obs_rng_(c.master_seed, static_cast<std::uint64_t>(replicate), StreamId::observations),
        errors_(c.truth_error, c.grid(),
                RngStream(c.master_seed, static_cast<std::uint64_t>(replicate), StreamId::model_error)) {
    if (c.truth_error.stochastic) Qs_ = realize_covariance(*c.truth_error.stochastic, grid_);
    if (const auto* l96 = std::get_if<Lorenz96Dynamics>(&dyn_)) {
      // Start on the attractor.
      Vector x = Vector::Constant(grid_.dim, l96->forcing) + 0.01 * truth_rng_.standard_normal(grid_.dim);
      state_ = step_model(x, dyn_, Vector::Zero(grid_.dim), 1000);
    } else {
      state_ = Vector::Zero(grid_.dim);
    }
  }

  WindowData next_window() {
    WindowData w;
    w.cycle = cycle_++;
    w.eta = errors_.sample(w.cycle);
    StepNoise noise;
    if (Qs_) noise = [this](int) { return Qs_->sample(noise_rng_); };
    w.truth = integrate(state_, dyn_, w.eta, steps_, noise);
    w.batches = obs::generate_observations(w.truth, H_, R_, obs_times_, w.cycle, obs_rng_);
    state_ = w.truth.back();
    for (const auto& x : w.truth.states) absorb(x);
    for (const auto& b : w.batches) absorb(b.values);
    return w;
  }

  /// Running FNV-1a hash of every truth state and observation value produced.
  [[nodiscard]] std::uint64_t hash() const { return hash_; }
  [[nodiscard]] const obs::ObservationOperator& H() const { return H_; }
  [[nodiscard]] const RealizedCovariance& R() const { return R_; }

 private:
  void absorb(const Vector& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(v.size()) * sizeof(double); ++i) {
      hash_ ^= bytes[i];
      hash_ *= 0x100000001b3ULL;
    }
  }

  DynamicsSpec dyn_;
  Grid grid_;
  int steps_;
  std::vector<int> obs_times_;
  obs::ObservationOperator H_;
  RealizedCovariance R_;
  std::optional<RealizedCovariance> Qs_;
  RngStream truth_rng_;
  RngStream noise_rng_;
  RngStream obs_rng_;
  ModelErrorGenerator errors_;
  Vector state_;
  long cycle_ = 0;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

inline Matrix stochastic_step_covariance(const ExperimentConfig& c) {
  if (!c.truth_error.stochastic) return Matrix::Zero(c.dimension, c.dimension);
  return covariance_matrix(*c.truth_error.stochastic, c.grid());
}

inline da::AssimilationSetup make_setup(const ExperimentConfig& c) {
  da::AssimilationSetup s;
  s.scheme = c.scheme;
  s.dynamics = c.dynamics;
  s.grid = c.grid();
  s.H = obs::ObservationOperator(c.obs_network, c.dimension);
  s.R = std::make_shared<const RealizedCovariance>(s.H.observation_covariance(c.R, s.grid));
  s.B = std::make_shared<const RealizedCovariance>(c.b_inflation * covariance_matrix(c.B, s.grid));
  s.Qs_step = stochastic_step_covariance(c);
  s.obs_times = c.effective_obs_times();
  s.solver = c.solver;
  return s;
}

using RecordVisitor = std::function<void(const WindowData&, const da::AssimilationCycleRecord&)>;

/// Runs all cycles of one replicate, handing every record (spin-up included)
/// to the visitor. Returns the world hash.
inline std::uint64_t run_replicate(const ExperimentConfig& c, int replicate, const RecordVisitor& visit) {
  TwinWorld world(c, replicate);
  RngStream bg(c.master_seed, static_cast<std::uint64_t>(replicate), StreamId::background);
  const Vector perturbation = realize_covariance(c.B, c.grid()).sample(bg);
  da::CycleAssimilator assim(make_setup(c), perturbation);
  for (long n = 0; n < c.cycles; ++n) {
    const WindowData w = world.next_window();
    const auto rec = assim.run_cycle(n, w.truth, w.batches);
    if (visit) visit(w, rec);
  }
  return world.hash();
}

struct ReplicateRecords {
  int replicate = 0;
  std::vector<da::AssimilationCycleRecord> records;  // cycles >= spinup only
  std::uint64_t world_hash = 0;
  std::optional<std::string> failure;
};

struct RecordStore {
  ExperimentConfig config;
  std::vector<ReplicateRecords> replicates;

  [[nodiscard]] std::size_t record_count() const {
    std::size_t n = 0;
    for (const auto& r : replicates) n += r.records.size();
    return n;
  }
};

struct ReplicateSeeds {
  int replicate = 0;
  std::uint64_t truth = 0;
  std::uint64_t observations = 0;
  std::uint64_t background = 0;
  std::uint64_t truth_noise = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string artifact_version = kArtifactVersion;
  std::uint64_t master_seed = 0;
  std::vector<ReplicateSeeds> seeds;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
  bool partial = false;
  std::vector<std::string> failures;

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["artifact_version"] = artifact_version;
    j["master_seed"] = master_seed;
    j["seeds"] = nlohmann::json::array();
    for (const auto& s : seeds) {
      j["seeds"].push_back({{"replicate", s.replicate},
                            {"truth", s.truth},
                            {"observations", s.observations},
                            {"background", s.background},
                            {"truth_noise", s.truth_noise}});
    }
    j["started"] = started;
    j["finished"] = finished;
    j["outputs"] = outputs;
    j["partial"] = partial;
    j["failures"] = failures;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.config_hash = j.at("config_hash").get<std::string>();
    m.artifact_version = j.at("artifact_version").get<std::string>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    for (const auto& s : j.at("seeds")) {
      m.seeds.push_back({s.at("replicate").get<int>(), s.at("truth").get<std::uint64_t>(),
                         s.at("observations").get<std::uint64_t>(), s.at("background").get<std::uint64_t>(),
                         s.at("truth_noise").get<std::uint64_t>()});
    }
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.partial = j.value("partial", false);
    m.failures = j.value("failures", std::vector<std::string>{});
    return m;
  }
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Runs `count` jobs over `threads` workers. Job i only writes slot i, so the
/// thread count never changes results.
inline void parallel_for(int count, int threads, const std::function<void(int)>& job) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct ExperimentResult {
  RecordStore store;
  RunManifest manifest;
};

/// Replicates run concurrently. A failing replicate keeps the records it
/// produced and marks the manifest partial.
inline ExperimentResult run_experiment(const ExperimentConfig& c, int threads = 1) {
  if (const auto problems = check_config(c); !problems.empty()) throw ConfigError(problems);
  ExperimentResult out;
  out.store.config = c;
  out.manifest.config_hash = config_hash(c);
  out.manifest.master_seed = c.master_seed;
  out.manifest.started = utc_timestamp();
  out.store.replicates.resize(static_cast<std::size_t>(c.replicates));

  parallel_for(c.replicates, threads, [&](int r) {
    auto& slot = out.store.replicates[static_cast<std::size_t>(r)];
    slot.replicate = r;
    long reached = 0;
    try {
      slot.world_hash = run_replicate(c, r, [&](const WindowData&, const da::AssimilationCycleRecord& rec) {
        reached = rec.cycle_index + 1;
        if (rec.cycle_index >= c.spinup) slot.records.push_back(rec);
      });
    } catch (const NumericalError& e) {
      slot.failure = "replicate " + std::to_string(r) + ", cycle " + std::to_string(reached) + ": " + e.what();
    }
  });

  for (int r = 0; r < c.replicates; ++r) {
    const auto rep = static_cast<std::uint64_t>(r);
    out.manifest.seeds.push_back({r, derive_seed(c.master_seed, rep, StreamId::truth),
                                  derive_seed(c.master_seed, rep, StreamId::observations),
                                  derive_seed(c.master_seed, rep, StreamId::background),
                                  derive_seed(c.master_seed, rep, StreamId::truth_noise)});
    if (const auto& f = out.store.replicates[static_cast<std::size_t>(r)].failure) {
      out.manifest.partial = true;
      out.manifest.failures.push_back(*f);
    }
  }
  out.manifest.finished = utc_timestamp();
  return out;
}

}  // namespace laic::harness
