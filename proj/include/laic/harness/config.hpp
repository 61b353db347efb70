#pragma once

#include "laic/core.hpp"
#include "laic/covariance.hpp"
#include "laic/da/cycling.hpp"
#include "laic/dynamics.hpp"
#include "laic/model_error.hpp"
#include "laic/observing.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace laic::harness {

inline constexpr const char* kArtifactVersion = "0.3.0";

/// Full twin-experiment description.
struct ExperimentConfig {
  int dimension = 8;
  double grid_spacing = 1.0;
  DynamicsSpec dynamics = LinearDynamics{Matrix::Identity(8, 8), 1};
  ModelErrorProcess truth_error;

  obs::ObservationOperatorSpec obs_network = obs::Full{};
  CovarianceSpec R = IsotropicCovariance{1.0, 0.0, Kernel::gaussian};
  std::vector<int> obs_times;  // empty means the last step of the window

  da::SchemeSpec scheme = da::StrongConstraintScheme{};
  CovarianceSpec B = IsotropicCovariance{1.0, 0.0, Kernel::gaussian};
  double b_inflation = 1.0;  // the scheme uses b_inflation * B; perturbations come from B

  da::SolverOptions solver;
  int cycles = 2000;
  int spinup = 100;
  int replicates = 20;
  std::uint64_t master_seed = 1;
  int diurnal_period = 2;

  [[nodiscard]] Grid grid() const { return Grid{dimension, grid_spacing}; }
  [[nodiscard]] int window_steps() const { return steps_per_window(dynamics); }
  [[nodiscard]] std::vector<int> effective_obs_times() const {
    return obs_times.empty() ? std::vector<int>{window_steps()} : obs_times;
  }
};

// ---------------------------------------------------------------------------
// Value formatting and parsing
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(const std::string& s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <class T>
std::string join_values(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

inline std::string join_vector(const Vector& v) {
  return join_values(std::vector<double>(v.data(), v.data() + v.size()));
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Text parser
// ---------------------------------------------------------------------------

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "dimension", "grid_spacing", "dynamics", "steps_per_window", "linear.matrix",
      "linear.stencil", "linear.decay", "l96.forcing", "l96.dt", "truth_error", "constant.bias",
      "ar1.rho", "ar1.variance", "ar1.length", "ar1.kernel", "diurnal.amplitude",
      "diurnal.period", "diurnal.phase", "stochastic.variance", "stochastic.length",
      "stochastic.kernel", "obs.network", "obs.stride", "obs.offset", "obs.indices", "obs.times",
      "obs.variance", "obs.length", "obs.kernel", "scheme", "wc.strategy", "wc.lag", "wc.mask",
      "wc.variance", "wc.length", "wc.kernel", "kf.q_inflation", "b.variance", "b.length",
      "b.kernel", "b.inflation", "solver.outer_loops", "solver.max_inner",
      "solver.inner_tolerance", "solver.max_step_halvings", "cycles", "spinup", "replicates",
      "seed", "diurnal_period"};
  return keys;
}

struct Entry {
  std::string value;
  int line = 0;
};

class Reader {
 public:
  explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  std::vector<std::string> problems;

  [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string where(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? key : "line " + std::to_string(it->second.line) + ": " + key;
  }

  void fail(const std::string& key, const std::string& msg) { problems.push_back(where(key) + ": " + msg); }

  std::string text(const std::string& key, const std::string& fallback) {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second.value;
  }

  double real(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto v = parse_double(entries_.at(key).value);
    if (!v || !std::isfinite(*v)) {
      fail(key, "expected a finite number, got '" + entries_.at(key).value + "'");
      return fallback;
    }
    return *v;
  }

  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const auto v = parse_int(entries_.at(key).value);
    if (!v) {
      fail(key, "expected an integer, got '" + entries_.at(key).value + "'");
      return fallback;
    }
    return *v;
  }

  std::vector<double> reals(const std::string& key) {
    std::vector<double> out;
    if (!has(key)) return out;
    for (const auto& item : split_list(entries_.at(key).value)) {
      const auto v = parse_double(item);
      if (!v || !std::isfinite(*v)) {
        fail(key, "expected a list of finite numbers, got '" + item + "'");
        return {};
      }
      out.push_back(*v);
    }
    return out;
  }

  std::vector<int> integers(const std::string& key) {
    std::vector<int> out;
    if (!has(key)) return out;
    for (const auto& item : split_list(entries_.at(key).value)) {
      const auto v = parse_int(item);
      if (!v) {
        fail(key, "expected a list of integers, got '" + item + "'");
        return {};
      }
      out.push_back(static_cast<int>(*v));
    }
    return out;
  }

  Kernel kernel(const std::string& key) {
    const std::string v = text(key, "gaussian");
    if (v == "gaussian") return Kernel::gaussian;
    if (v == "soar") return Kernel::soar;
    fail(key, "unknown kernel '" + v + "' (gaussian, soar)");
    return Kernel::gaussian;
  }

  /// prefix.variance (scalar or per-component list), prefix.length, prefix.kernel.
  CovarianceSpec covariance(const std::string& prefix, int d, double default_variance) {
    const auto vars = reals(prefix + ".variance");
    const double length = real(prefix + ".length", 0.0);
    const Kernel k = kernel(prefix + ".kernel");
    if (length < 0.0) fail(prefix + ".length", "must be >= 0");
    for (double v : vars)
      if (v < 0.0) fail(prefix + ".variance", "must be >= 0");
    if (vars.size() > 1) {
      if (static_cast<int>(vars.size()) != d) {
        fail(prefix + ".variance", "dimension mismatch: " + std::to_string(vars.size()) +
                                       " values for dimension " + std::to_string(d));
        return IsotropicCovariance{default_variance, 0.0, k};
      }
      if (length > 0.0) fail(prefix + ".length", "per-component variances take no length");
      return DiagonalCovariance{Eigen::Map<const Vector>(vars.data(), d)};
    }
    return IsotropicCovariance{vars.empty() ? default_variance : vars.front(), length, k};
  }

  /// Scalar broadcast or length-d list.
  Vector field(const std::string& key, int d, double fallback) {
    const auto vals = reals(key);
    if (vals.empty()) return Vector::Constant(d, fallback);
    if (vals.size() == 1) return Vector::Constant(d, vals.front());
    if (static_cast<int>(vals.size()) != d) {
      fail(key, "dimension mismatch: " + std::to_string(vals.size()) + " values for dimension " +
                    std::to_string(d));
      return Vector::Constant(d, fallback);
    }
    return Eigen::Map<const Vector>(vals.data(), d);
  }

 private:
  std::map<std::string, Entry> entries_;
};

inline Matrix circulant_from_stencil(const std::vector<double>& stencil, int d) {
  const int half = static_cast<int>(stencil.size()) / 2;
  Matrix m = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int s = 0; s < static_cast<int>(stencil.size()); ++s)
      m(i, ((i + s - half) % d + d) % d) += stencil[static_cast<std::size_t>(s)];
  return m;
}

}  // namespace detail

struct ValidationResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;
  [[nodiscard]] bool ok() const { return config.has_value(); }
};

/// Semantic checks on a fully built config. Messages are prefixed with the
/// offending key.
inline std::vector<std::string> check_config(const ExperimentConfig& c) {
  std::vector<std::string> problems;
  auto guard = [&](const char* key, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back(std::string(key) + ": " + p);
    } catch (const Error& e) {
      problems.push_back(std::string(key) + ": " + e.what());
    }
  };
  if (c.dimension < 1) {
    problems.push_back("dimension: must be >= 1");
    return problems;
  }
  if (!(c.grid_spacing > 0.0)) problems.push_back("grid_spacing: must be > 0");
  const Grid g = c.grid();
  guard("dynamics", [&] { validate_dynamics(c.dynamics, c.dimension); });
  guard("truth_error", [&] { validate_model_error(c.truth_error, g); });
  for (const auto& t : c.truth_error.terms)
    if (const auto* ar = std::get_if<AR1Error>(&t))
      guard("ar1", [&] { covariance_matrix(ar->noise_cov, g); });
  if (c.truth_error.stochastic) guard("stochastic", [&] { realize_covariance(*c.truth_error.stochastic, g); });
  guard("obs.network", [&] { obs::ObservationOperator(c.obs_network, c.dimension); });
  guard("obs.variance", [&] { realize_covariance(c.R, g); });
  guard("b.variance", [&] { realize_covariance(c.B, g); });
  if (!(c.b_inflation > 0.0)) problems.push_back("b.inflation: must be > 0");
  const int S = c.window_steps();
  for (int t : c.effective_obs_times())
    if (t < 0 || t > S) problems.push_back("obs.times: " + std::to_string(t) + " outside [0, " + std::to_string(S) + "]");
  if (const auto* wc = std::get_if<da::WeakConstraintScheme>(&c.scheme)) {
    if (static_cast<int>(wc->active_mask.size()) != c.dimension) {
      problems.push_back("wc.mask: dimension error: length " + std::to_string(wc->active_mask.size()) +
                         " does not match dimension " + std::to_string(c.dimension));
    } else if (std::none_of(wc->active_mask.begin(), wc->active_mask.end(), [](bool b) { return b; })) {
      problems.push_back("wc.mask: at least one component must be active");
    }
    if (wc->diurnal_lag < 1) problems.push_back("wc.lag: must be >= 1");
    guard("wc.variance", [&] { realize_covariance(wc->Q, g); });
  }
  if (const auto* kf = std::get_if<da::KalmanFilterScheme>(&c.scheme)) {
    if (c.effective_obs_times().size() != 1) problems.push_back("obs.times: the kf scheme needs exactly one observation time");
    if (!(kf->q_inflation >= 0.0)) problems.push_back("kf.q_inflation: must be >= 0");
  }
  if (c.solver.outer_loops < 1) problems.push_back("solver.outer_loops: must be >= 1");
  if (c.solver.max_inner < 0) problems.push_back("solver.max_inner: must be >= 0");
  if (!(c.solver.inner_tolerance > 0.0)) problems.push_back("solver.inner_tolerance: must be > 0");
  if (c.spinup < 0) problems.push_back("spinup: must be >= 0");
  if (c.cycles < c.spinup) problems.push_back("cycles: must be >= spinup");
  if (c.replicates < 1) problems.push_back("replicates: must be >= 1");
  if (c.diurnal_period < 1) problems.push_back("diurnal_period: must be >= 1");
  return problems;
}

/// Parses key = value text ('#' starts a comment). All problems are
/// collected and reported together, anchored to their lines.
inline ValidationResult validate_config(const std::string& text) {
  ValidationResult result;
  std::map<std::string, detail::Entry> entries;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      result.errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!detail::known_keys().count(key)) {
      result.errors.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      continue;
    }
    if (entries.count(key)) {
      result.errors.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key +
                              "' (first on line " + std::to_string(entries[key].line) + ")");
      continue;
    }
    entries[key] = {value, line_no};
  }

  detail::Reader r(std::move(entries));
  ExperimentConfig c;
  if (!r.has("dimension")) r.problems.push_back("dimension: required key missing");
  c.dimension = static_cast<int>(r.integer("dimension", 8));
  if (c.dimension < 1) {
    r.fail("dimension", "must be >= 1");
    c.dimension = 1;
  }
  const int d = c.dimension;
  c.grid_spacing = r.real("grid_spacing", 1.0);
  if (!(c.grid_spacing > 0.0)) r.fail("grid_spacing", "must be > 0");

  const std::string dyn = r.text("dynamics", "linear");
  const auto steps = static_cast<int>(r.integer("steps_per_window", dyn == "lorenz96" ? 12 : 1));
  if (steps < 1) r.fail("steps_per_window", "must be >= 1");
  if (dyn == "linear") {
    LinearDynamics lin;
    lin.steps_per_window = std::max(steps, 1);
    if (r.has("linear.matrix") && r.has("linear.stencil")) {
      r.fail("linear.stencil", "give either linear.matrix or linear.stencil");
    }
    if (r.has("linear.matrix")) {
      const auto vals = r.reals("linear.matrix");
      if (static_cast<int>(vals.size()) != d * d) {
        r.fail("linear.matrix", "dimension mismatch: expected " + std::to_string(d * d) + " values");
        lin.M = Matrix::Identity(d, d);
      } else {
        lin.M = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            vals.data(), d, d);
      }
    } else {
      auto stencil = r.reals("linear.stencil");
      if (stencil.empty()) stencil = {1.0};
      if (stencil.size() % 2 == 0) r.fail("linear.stencil", "needs an odd number of coefficients");
      lin.M = detail::circulant_from_stencil(stencil, d);
    }
    lin.M *= r.real("linear.decay", 1.0);
    c.dynamics = lin;
  } else if (dyn == "lorenz96") {
    Lorenz96Dynamics l;
    l.forcing = r.real("l96.forcing", 8.0);
    l.dt = r.real("l96.dt", 0.05);
    if (!(l.dt > 0.0)) r.fail("l96.dt", "must be > 0");
    l.steps_per_window = std::max(steps, 1);
    if (d < 4) r.fail("dimension", "lorenz96 requires dimension >= 4");
    c.dynamics = l;
  } else {
    r.fail("dynamics", "unknown dynamics '" + dyn + "' (linear, lorenz96)");
  }

  for (const auto& kind : split_list(r.text("truth_error", "zero"))) {
    if (kind == "zero") {
      c.truth_error.terms.emplace_back(ZeroError{});
    } else if (kind == "constant") {
      c.truth_error.terms.emplace_back(ConstantBias{r.field("constant.bias", d, 0.0)});
    } else if (kind == "ar1") {
      AR1Error ar;
      ar.rho = r.real("ar1.rho", 0.8);
      if (!(ar.rho >= 0.0 && ar.rho < 1.0)) r.fail("ar1.rho", "range error: must lie in [0, 1), got " + format_double(ar.rho));
      ar.noise_cov = r.covariance("ar1", d, 1.0);
      c.truth_error.terms.emplace_back(ar);
    } else if (kind == "diurnal") {
      DiurnalError di;
      di.amplitude = r.field("diurnal.amplitude", d, 0.0);
      di.period_windows = static_cast<int>(r.integer("diurnal.period", 2));
      di.phase = static_cast<int>(r.integer("diurnal.phase", 0));
      if (di.period_windows < 2) r.fail("diurnal.period", "range error: must be >= 2");
      c.truth_error.terms.emplace_back(di);
    } else {
      r.fail("truth_error", "unknown term '" + kind + "' (zero, constant, ar1, diurnal)");
    }
  }
  if (r.has("stochastic.variance")) c.truth_error.stochastic = r.covariance("stochastic", d, 0.0);

  const std::string net = r.text("obs.network", "full");
  if (net == "full") {
    c.obs_network = obs::Full{};
  } else if (net == "every") {
    c.obs_network = obs::EveryKth{static_cast<int>(r.integer("obs.stride", 1)),
                                  static_cast<int>(r.integer("obs.offset", 0))};
  } else if (net == "indices") {
    c.obs_network = obs::IndexSet{r.integers("obs.indices")};
  } else {
    r.fail("obs.network", "unknown network '" + net + "' (full, every, indices)");
  }
  c.obs_times = r.integers("obs.times");
  c.R = r.covariance("obs", d, 1.0);

  const std::string scheme = r.text("scheme", "sc");
  if (scheme == "kf") {
    c.scheme = da::KalmanFilterScheme{r.real("kf.q_inflation", 1.0)};
  } else if (scheme == "sc") {
    c.scheme = da::StrongConstraintScheme{};
  } else if (scheme == "wc") {
    da::WeakConstraintScheme wc;
    const std::string strat = r.text("wc.strategy", "cycled");
    if (strat == "restarted") {
      wc.strategy = da::CyclingStrategy::restarted;
    } else if (strat == "cycled") {
      wc.strategy = da::CyclingStrategy::cycled;
    } else if (strat == "diurnal") {
      wc.strategy = da::CyclingStrategy::diurnally_cycled;
    } else {
      r.fail("wc.strategy", "unknown strategy '" + strat + "' (restarted, cycled, diurnal)");
    }
    wc.diurnal_lag = static_cast<int>(r.integer("wc.lag", 2));
    if (wc.diurnal_lag < 1) r.fail("wc.lag", "must be >= 1");
    const std::string mask = r.text("wc.mask", "all");
    if (mask == "all") {
      wc.active_mask.assign(static_cast<std::size_t>(d), true);
    } else {
      for (int v : r.integers("wc.mask")) {
        if (v != 0 && v != 1) r.fail("wc.mask", "entries must be 0 or 1");
        wc.active_mask.push_back(v != 0);
      }
      if (static_cast<int>(wc.active_mask.size()) != d) {
        r.fail("wc.mask", "dimension error: length " + std::to_string(wc.active_mask.size()) +
                              " does not match dimension " + std::to_string(d));
      }
    }
    wc.Q = r.covariance("wc", d, 1.0);
    c.scheme = wc;
  } else {
    r.fail("scheme", "unknown scheme '" + scheme + "' (kf, sc, wc)");
  }

  c.B = r.covariance("b", d, 1.0);
  c.b_inflation = r.real("b.inflation", 1.0);
  if (!(c.b_inflation > 0.0)) r.fail("b.inflation", "must be > 0");

  c.solver.outer_loops = static_cast<int>(r.integer("solver.outer_loops", 3));
  c.solver.max_inner = static_cast<int>(r.integer("solver.max_inner", 0));
  c.solver.inner_tolerance = r.real("solver.inner_tolerance", 1e-10);
  c.solver.max_step_halvings = static_cast<int>(r.integer("solver.max_step_halvings", 10));

  c.cycles = static_cast<int>(r.integer("cycles", 2000));
  c.spinup = static_cast<int>(r.integer("spinup", 100));
  c.replicates = static_cast<int>(r.integer("replicates", 20));
  const long long seed = r.integer("seed", 1);
  if (seed < 0) r.fail("seed", "must be >= 0");
  c.master_seed = static_cast<std::uint64_t>(seed);
  c.diurnal_period = static_cast<int>(r.integer("diurnal_period", 2));

  result.errors.insert(result.errors.end(), r.problems.begin(), r.problems.end());
  if (result.errors.empty()) {
    for (const auto& p : check_config(c)) result.errors.push_back(p);
  }
  if (result.errors.empty()) result.config = std::move(c);
  return result;
}

inline ExperimentConfig parse_config(const std::string& text) {
  auto res = validate_config(text);
  if (!res.ok()) throw ConfigError(res.errors);
  return std::move(*res.config);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read file", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Canonical serialization
// ---------------------------------------------------------------------------

namespace detail {

inline std::string kernel_name(Kernel k) { return k == Kernel::gaussian ? "gaussian" : "soar"; }

inline void put_covariance(std::ostringstream& out, const std::string& prefix, const CovarianceSpec& spec) {
  if (const auto* dg = std::get_if<DiagonalCovariance>(&spec)) {
    out << prefix << ".variance = " << join_vector(dg->variances) << "\n";
  } else {
    const auto& iso = std::get<IsotropicCovariance>(spec);
    out << prefix << ".variance = " << format_double(iso.variance) << "\n";
    out << prefix << ".length = " << format_double(iso.correlation_length) << "\n";
    out << prefix << ".kernel = " << kernel_name(iso.kernel) << "\n";
  }
}

}  // namespace detail

/// Canonical text form: every key spelled out in a fixed order, numbers in
/// shortest round-trip form. parse(serialize(c)) reproduces c.
inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "dimension = " << c.dimension << "\n";
  out << "grid_spacing = " << format_double(c.grid_spacing) << "\n";
  if (const auto* lin = std::get_if<LinearDynamics>(&c.dynamics)) {
    out << "dynamics = linear\n";
    out << "steps_per_window = " << lin->steps_per_window << "\n";
    std::vector<double> vals;
    for (int i = 0; i < lin->M.rows(); ++i)
      for (int j = 0; j < lin->M.cols(); ++j) vals.push_back(lin->M(i, j));
    out << "linear.matrix = " << join_values(vals) << "\n";
  } else {
    const auto& l = std::get<Lorenz96Dynamics>(c.dynamics);
    out << "dynamics = lorenz96\n";
    out << "steps_per_window = " << l.steps_per_window << "\n";
    out << "l96.forcing = " << format_double(l.forcing) << "\n";
    out << "l96.dt = " << format_double(l.dt) << "\n";
  }

  std::vector<std::string> kinds;
  std::ostringstream terms;
  for (const auto& t : c.truth_error.terms) {
    if (std::holds_alternative<ZeroError>(t)) kinds.push_back("zero");
    if (const auto* b = std::get_if<ConstantBias>(&t)) {
      kinds.push_back("constant");
      terms << "constant.bias = " << join_vector(b->bias) << "\n";
    }
    if (const auto* ar = std::get_if<AR1Error>(&t)) {
      kinds.push_back("ar1");
      terms << "ar1.rho = " << format_double(ar->rho) << "\n";
      detail::put_covariance(terms, "ar1", ar->noise_cov);
    }
    if (const auto* di = std::get_if<DiurnalError>(&t)) {
      kinds.push_back("diurnal");
      terms << "diurnal.amplitude = " << join_vector(di->amplitude) << "\n";
      terms << "diurnal.period = " << di->period_windows << "\n";
      terms << "diurnal.phase = " << di->phase << "\n";
    }
  }
  std::string kind_list;
  for (const auto& k : kinds) kind_list += (kind_list.empty() ? "" : ",") + k;
  out << "truth_error = " << (kind_list.empty() ? "zero" : kind_list) << "\n" << terms.str();
  if (c.truth_error.stochastic) detail::put_covariance(out, "stochastic", *c.truth_error.stochastic);

  if (std::holds_alternative<obs::Full>(c.obs_network)) {
    out << "obs.network = full\n";
  } else if (const auto* ek = std::get_if<obs::EveryKth>(&c.obs_network)) {
    out << "obs.network = every\nobs.stride = " << ek->stride << "\nobs.offset = " << ek->offset << "\n";
  } else {
    out << "obs.network = indices\nobs.indices = " << join_values(std::get<obs::IndexSet>(c.obs_network).indices)
        << "\n";
  }
  out << "obs.times = " << join_values(c.effective_obs_times()) << "\n";
  detail::put_covariance(out, "obs", c.R);

  if (const auto* kf = std::get_if<da::KalmanFilterScheme>(&c.scheme)) {
    out << "scheme = kf\nkf.q_inflation = " << format_double(kf->q_inflation) << "\n";
  } else if (std::holds_alternative<da::StrongConstraintScheme>(c.scheme)) {
    out << "scheme = sc\n";
  } else {
    const auto& wc = std::get<da::WeakConstraintScheme>(c.scheme);
    static const char* names[] = {"restarted", "cycled", "diurnal"};
    out << "scheme = wc\nwc.strategy = " << names[static_cast<int>(wc.strategy)] << "\n";
    out << "wc.lag = " << wc.diurnal_lag << "\n";
    std::vector<int> mask;
    for (bool b : wc.active_mask) mask.push_back(b ? 1 : 0);
    out << "wc.mask = " << join_values(mask) << "\n";
    detail::put_covariance(out, "wc", wc.Q);
  }
  detail::put_covariance(out, "b", c.B);
  out << "b.inflation = " << format_double(c.b_inflation) << "\n";
  out << "solver.outer_loops = " << c.solver.outer_loops << "\n";
  out << "solver.max_inner = " << c.solver.max_inner << "\n";
  out << "solver.inner_tolerance = " << format_double(c.solver.inner_tolerance) << "\n";
  out << "solver.max_step_halvings = " << c.solver.max_step_halvings << "\n";
  out << "cycles = " << c.cycles << "\n";
  out << "spinup = " << c.spinup << "\n";
  out << "replicates = " << c.replicates << "\n";
  out << "seed = " << c.master_seed << "\n";
  out << "diurnal_period = " << c.diurnal_period << "\n";
  return out.str();
}

inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a(serialize_config(c))); }

}  // namespace laic::harness
