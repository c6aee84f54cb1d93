#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "semicorr/correlation.hpp"

namespace semicorr {

inline constexpr int kConfigSchemaVersion = 1;

// Parsed, validated run configuration. Scenario-specific inputs live in
// `params`; pass/fail bounds live in `thresholds` as
//   "metric": max   or   "metric": {"min": lo, "max": hi}.
struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string scenario;
  std::optional<std::uint64_t> seed;  // required by run()
  std::string output_dir;
  // Periodic box for the wave scenarios.
  int dim = 1;
  int n = 128;
  double length = 1;
  double epsilon = 0.01;
  nlohmann::json medium;  // Medium::from_json
  nlohmann::json noise;   // PowerSpectrum::from_json, plus optional "rank_tolerance"
  std::vector<Eigen::Vector2d> receivers;
  double tau_max = 1;
  double window = 0;    // 0: 200 tau_max
  double burn_in = -1;  // < 0: 5 T_att
  long ensemble = 32;
  int batch = 32;
  double cfl = 0.25;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json thresholds = nlohmann::json::object();

  // Throws InvalidArgument naming the offending key.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
  // SHA-256 of the canonical (sorted-key) JSON form.
  std::string hash() const;
  void validate() const;
};

struct ScenarioInfo {
  std::string name;
  std::string description;
};

std::vector<ScenarioInfo> list_scenarios();
// Template config for a built-in scenario (no seed).
ExperimentConfig scenario_preset(const std::string& name);

struct ThresholdCheck {
  std::string metric;
  double value = 0;
  std::optional<double> min, max;
  bool passed = false;
  bool skipped = false;  // metric undefined, e.g. a zero reference
};

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string scenario;
  std::string config_hash;
  std::string code_version;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::vector<ManifestEntry> files;
  double wall_clock_seconds = 0;
  std::vector<std::string> warnings;
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json diagnostics = nlohmann::json::object();
  std::vector<ThresholdCheck> checks;
  // Empty when the config sets no thresholds.
  std::optional<bool> passed;

  nlohmann::json to_json() const;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::string output_dir;             // overrides the config directory
  int threads = 1;
  bool strict = false;  // warnings fail the run
};

// Executes the configured scenario, writes records and manifest.json into the
// output directory, and returns the manifest. The directory must be empty or
// hold a previous run (manifest.json present), which is cleared first.
RunManifest run(const ExperimentConfig& config, const RunOptions& opt = {});

// Process exit status for a finished run: 0 pass (or no thresholds),
// 1 threshold failure, 3 warnings under strict mode.
int exit_code(const RunManifest& m, bool strict);

// Lags with lo <= |tau| <= hi; sign restricts to tau > 0 (+1) or tau < 0 (-1).
struct LagWindow {
  double lo = 0;
  double hi = 0;
  int sign = 0;
};

struct CompareMetrics {
  double relative_l2 = 0;     // |x - ref| / |ref| on the window
  long peak_shift_samples = 0;  // argmax |x| - argmax |ref|, reference lag steps
  double peak_shift_time = 0;
  double amplitude_ratio = 0;  // least-squares <x, ref> / <ref, ref>
  long samples = 0;
};

// Windowed comparison of x against ref; x is linearly resampled onto the lag
// grid of ref when the grids differ. Throws when the window misses either.
CompareMetrics compare(const CorrelationRecord& x, const CorrelationRecord& ref, const LagWindow& w);
// records[i] against records[0], i >= 1.
std::vector<CompareMetrics> compare(const std::vector<CorrelationRecord>& records, const LagWindow& w);
nlohmann::json to_json(const CompareMetrics& m);

// Reads the tau,value,provenance CSV written by write_csv.
CorrelationRecord read_record_csv(const std::string& path);

}  // namespace semicorr
