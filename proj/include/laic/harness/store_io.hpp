#pragma once

#include "laic/harness/config.hpp"
#include "laic/harness/experiment.hpp"

#include <filesystem>
#include <fstream>

namespace laic::harness {

namespace fs = std::filesystem;

/// Store layout: config.txt (canonical config), manifest.json, records.csv
/// with one row per (replicate, cycle, quantity), replicates.csv.
inline constexpr const char* kRecordsFile = "records.csv";
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kReplicatesFile = "replicates.csv";

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file", path.string());
  return out;
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw IoError("write failed", path.string());
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory (" + ec.message() + ")", dir.string());
}

namespace detail {

inline void put_row(std::ostream& out, int rep, long cycle, const char* quantity, int time, const Vector& v) {
  out << rep << ',' << cycle << ',' << quantity << ',' << time;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v[i]);
  out << '\n';
}

}  // namespace detail

inline void save_store(const RecordStore& store, RunManifest& manifest, const fs::path& dir) {
  ensure_directory(dir);
  write_text_file(dir / kConfigFile, serialize_config(store.config));
  {
    auto out = open_output(dir / kRecordsFile);
    out << "replicate,cycle,quantity,time,values\n";
    for (const auto& rep : store.replicates) {
      for (const auto& r : rep.records) {
        const int id = rep.replicate;
        detail::put_row(out, id, r.cycle_index, "xb", -1, r.xb);
        detail::put_row(out, id, r.cycle_index, "xa", -1, r.xa);
        detail::put_row(out, id, r.cycle_index, "increment", -1, r.increment);
        detail::put_row(out, id, r.cycle_index, "eta_a", -1, r.eta_a);
        detail::put_row(out, id, r.cycle_index, "eta_b", -1, r.eta_b);
        detail::put_row(out, id, r.cycle_index, "truth", -1, r.truth);
        for (const auto& d : r.departures) {
          detail::put_row(out, id, r.cycle_index, "omb", d.time_within_window, d.o_minus_b);
          detail::put_row(out, id, r.cycle_index, "oma", d.time_within_window, d.o_minus_a);
        }
        Vector st(6);
        st << r.stats.outer_iterations, r.stats.inner_iterations, r.stats.initial_cost, r.stats.final_cost,
            r.stats.initial_gradient_norm, r.stats.final_gradient_norm;
        detail::put_row(out, id, r.cycle_index, "stats", -1, st);
      }
    }
    if (!out) throw IoError("write failed", (dir / kRecordsFile).string());
  }
  {
    auto out = open_output(dir / kReplicatesFile);
    out << "replicate,world_hash,records,failure\n";
    for (const auto& rep : store.replicates) {
      out << rep.replicate << ',' << hex64(rep.world_hash) << ',' << rep.records.size() << ','
          << (rep.failure ? "\"" + *rep.failure + "\"" : "") << '\n';
    }
  }
  manifest.outputs = {(dir / kConfigFile).string(), (dir / kRecordsFile).string(),
                      (dir / kReplicatesFile).string(), (dir / kManifestFile).string()};
  write_text_file(dir / kManifestFile, manifest.to_json().dump(2) + "\n");
}

inline RunManifest load_manifest(const fs::path& dir) {
  const std::string text = read_text_file((dir / kManifestFile).string());
  try {
    return RunManifest::from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest (") + e.what() + ")", (dir / kManifestFile).string());
  }
}

inline RecordStore load_store(const fs::path& dir) {
  RecordStore store;
  store.config = parse_config(read_text_file((dir / kConfigFile).string()));

  const fs::path records_path = dir / kRecordsFile;
  std::ifstream in(records_path);
  if (!in) throw IoError("cannot read file", records_path.string());
  std::string line;
  std::getline(in, line);
  std::map<int, std::size_t> slot;
  int line_no = 1;
  auto bad = [&](const std::string& why) {
    return IoError("malformed record at line " + std::to_string(line_no) + " (" + why + ")", records_path.string());
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_list(line);
    if (fields.size() < 4) throw bad("too few fields");
    const auto rep = parse_int(fields[0]);
    const auto cycle = parse_int(fields[1]);
    const auto time = parse_int(fields[3]);
    if (!rep || !cycle || !time) throw bad("bad index");
    Vector v(static_cast<Eigen::Index>(fields.size() - 4));
    for (std::size_t i = 4; i < fields.size(); ++i) {
      const auto x = parse_double(fields[i]);
      if (!x) throw bad("bad number '" + fields[i] + "'");
      v[static_cast<Eigen::Index>(i - 4)] = *x;
    }
    if (!slot.count(static_cast<int>(*rep))) {
      slot[static_cast<int>(*rep)] = store.replicates.size();
      store.replicates.push_back({static_cast<int>(*rep), {}, 0, std::nullopt});
    }
    auto& records = store.replicates[slot[static_cast<int>(*rep)]].records;
    const std::string& q = fields[2];
    if (q == "xb") {
      records.emplace_back();
      records.back().cycle_index = *cycle;
    }
    if (records.empty() || records.back().cycle_index != *cycle) throw bad("record does not start with xb");
    auto& r = records.back();
    if (q == "xb") {
      r.xb = v;
    } else if (q == "xa") {
      r.xa = v;
    } else if (q == "increment") {
      r.increment = v;
    } else if (q == "eta_a") {
      r.eta_a = v;
    } else if (q == "eta_b") {
      r.eta_b = v;
    } else if (q == "truth") {
      r.truth = v;
    } else if (q == "omb") {
      r.departures.push_back({static_cast<int>(*time), v, Vector()});
    } else if (q == "oma") {
      if (r.departures.empty()) throw bad("oma without omb");
      r.departures.back().o_minus_a = v;
    } else if (q == "stats") {
      if (v.size() != 6) throw bad("stats needs 6 values");
      r.stats.outer_iterations = static_cast<int>(v[0]);
      r.stats.inner_iterations = static_cast<int>(v[1]);
      r.stats.initial_cost = v[2];
      r.stats.final_cost = v[3];
      r.stats.initial_gradient_norm = v[4];
      r.stats.final_gradient_norm = v[5];
    } else {
      throw bad("unknown quantity '" + q + "'");
    }
  }

  std::ifstream reps(dir / kReplicatesFile);
  if (reps) {
    std::getline(reps, line);
    while (std::getline(reps, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      const auto rep = parse_int(line.substr(0, comma));
      if (!rep) continue;
      if (!slot.count(static_cast<int>(*rep))) {
        slot[static_cast<int>(*rep)] = store.replicates.size();
        store.replicates.push_back({static_cast<int>(*rep), {}, 0, std::nullopt});
      }
      auto& r = store.replicates[slot[static_cast<int>(*rep)]];
      const auto fields = split_list(line);
      if (fields.size() >= 2) r.world_hash = std::stoull(fields[1], nullptr, 16);
      const auto quote = line.find('"');
      if (quote != std::string::npos) r.failure = line.substr(quote + 1, line.rfind('"') - quote - 1);
    }
  }
  std::sort(store.replicates.begin(), store.replicates.end(),
            [](const auto& a, const auto& b) { return a.replicate < b.replicate; });
  for (const auto& rep : store.replicates)
    for (const auto& r : rep.records)
      if (r.cycle_index < store.config.spinup) {
        throw IoError("store contains a spin-up cycle", records_path.string());
      }
  return store;
}

}  // namespace laic::harness
