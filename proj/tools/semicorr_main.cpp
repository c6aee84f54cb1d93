// semicorr: run built-in experiments, compare correlation records.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semicorr/error.hpp"
#include "semicorr/experiments.hpp"

using namespace semicorr;
using nlohmann::json;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitRuntime = 4;

int cmd_run(const std::string& config_path, const std::string& scenario, const std::string& out,
            std::optional<std::uint64_t> seed, int threads, bool strict) {
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = ExperimentConfig::load(config_path);
    if (!scenario.empty() && scenario != cfg.scenario)
      throw InvalidArgument("--scenario '" + scenario + "' disagrees with the config scenario '" + cfg.scenario + "'");
  } else if (!scenario.empty()) {
    cfg = scenario_preset(scenario);
  } else {
    throw InvalidArgument("run needs --config or --scenario");
  }
  RunOptions opt;
  opt.seed = seed;
  opt.output_dir = out;
  opt.threads = threads;
  opt.strict = strict;
  const RunManifest m = run(cfg, opt);
  json summary{{"scenario", m.scenario},
               {"output_dir", m.output_dir},
               {"config_hash", m.config_hash},
               {"metrics", m.metrics},
               {"warnings", m.warnings},
               {"passed", m.passed ? json(*m.passed) : json(nullptr)},
               {"files", m.files.size() + 1},
               {"wall_clock_seconds", m.wall_clock_seconds}};
  std::cout << summary.dump(2) << '\n';
  for (const auto& c : m.checks)
    std::cerr << (c.skipped ? "SKIP " : c.passed ? "PASS " : "FAIL ") << c.metric << '\n';
  const int code = exit_code(m, strict);
  if (code == 3) std::cerr << "strict mode: " << m.warnings.size() << " warning(s)\n";
  return code;
}

int cmd_compare(const std::vector<std::string>& files, double lo, double hi, int sign, const std::string& out) {
  std::vector<CorrelationRecord> recs;
  for (const auto& f : files) recs.push_back(read_record_csv(f));
  const auto metrics = compare(recs, {lo, hi, sign});
  json j{{"reference", files.front()}, {"window", {lo, hi}}, {"sign", sign}, {"results", json::array()}};
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    json r = to_json(metrics[i]);
    r["record"] = files[i + 1];
    j["results"].push_back(r);
  }
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream os(out);
    if (!os) throw InvalidArgument("cannot write '" + out + "'");
    os << j.dump(2) << '\n';
  }
  return 0;
}

int cmd_list(const std::string& show, bool as_json) {
  if (!show.empty()) {
    std::cout << scenario_preset(show).to_json().dump(2) << '\n';
    return 0;
  }
  const auto list = list_scenarios();
  if (as_json) {
    json j = json::array();
    for (const auto& s : list) j.push_back({{"name", s.name}, {"description", s.description}});
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  for (const auto& s : list) std::cout << s.name << "\n    " << s.description << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ambient-noise correlation experiments"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run a scenario and write records plus manifest.json");
  std::string config_path, scenario, out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool strict = false;
  run_cmd->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--scenario", scenario, "built-in scenario (its template is used without --config)");
  run_cmd->add_option("--out", out, "output directory (overrides the config)");
  run_cmd->add_option("--seed", seed, "seed (overrides the config)");
  run_cmd->add_option("--threads", threads, "worker threads for ensemble members")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--strict", strict, "fail when the run reports warnings");

  auto* cmp_cmd = app.add_subcommand("compare", "windowed metrics of records against the first one");
  std::vector<std::string> files;
  double lo = 0, hi = 0;
  int sign = 0;
  std::string cmp_out;
  cmp_cmd->add_option("records", files, "tau,value CSV records; the first is the reference")
      ->required()
      ->expected(2, -1)
      ->check(CLI::ExistingFile);
  cmp_cmd->add_option("--lo", lo, "smallest |tau| in the window")->required();
  cmp_cmd->add_option("--hi", hi, "largest |tau| in the window")->required();
  cmp_cmd->add_option("--sign", sign, "+1 positive lags only, -1 negative only, 0 both")
      ->check(CLI::IsMember({-1, 0, 1}));
  cmp_cmd->add_option("--out", cmp_out, "write the JSON here instead of stdout");

  auto* list_cmd = app.add_subcommand("list-scenarios", "list built-in scenarios");
  std::string show;
  bool as_json = false;
  list_cmd->add_option("--show", show, "print the template config of one scenario");
  list_cmd->add_flag("--json", as_json, "machine-readable list");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(config_path, scenario, out, seed, threads, strict);
    if (*cmp_cmd) return cmd_compare(files, lo, hi, sign, cmp_out);
    return cmd_list(show, as_json);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
