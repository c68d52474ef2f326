// mapcomm: run, batch and timing front end for the Actor-Sensor simulator.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mapcomm/config.hpp"
#include "mapcomm/report.hpp"
#include "mapcomm/sim.hpp"

namespace fs = std::filesystem;
using namespace mapcomm;

namespace {

constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::string> framework;
  std::optional<std::uint64_t> seed;
  std::optional<int> sensor_horizon;
  std::optional<std::string> decoder;
};

struct Prepared {
  ScenarioConfig config;
  fs::path base_dir;
  Codebook codebook;
  fs::path out;
};

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MAPCOMM_OUT"); env && *env) return env;
  return "mapcomm_out";
}

// Loads and validates the config, applies overrides, and loads the codebook.
// Any failure here is a configuration error.
Prepared prepare(const Common& c) {
  Prepared p;
  p.config = load_config(c.config_path);
  p.base_dir = fs::path(c.config_path).parent_path();
  if (c.framework) p.config.framework = parse_framework(*c.framework);
  if (c.seed) p.config.seed = *c.seed;
  if (c.sensor_horizon) {
    if (*c.sensor_horizon < 0) throw ConfigError("sensor.horizon", "must be non-negative");
    p.config.sensor.horizon = *c.sensor_horizon;
  }
  if (c.decoder) p.config.decoder = parse_decoder(*c.decoder);
  p.codebook = resolve_codebook(p.config.sensor.codebook, p.base_dir);
  p.out = output_dir(c.out_dir);
  return p;
}

GridMap map_or_config_error(const ScenarioConfig& cfg, int run_index, const fs::path& base_dir) {
  GridMap map = load_map(cfg.map, run_index, base_dir);
  validate(cfg, map.dims());
  return map;
}

void add_common(CLI::App* sub, Common& c, bool with_framework) {
  sub->add_option("config", c.config_path, "Scenario file")->required();
  sub->add_option("--out", c.out_dir, "Output directory (default: $MAPCOMM_OUT or ./mapcomm_out)");
  sub->add_option("--seed", c.seed, "Scenario seed");
  sub->add_option("--sensor-horizon", c.sensor_horizon, "Sensor horizon T^S in steps");
  if (with_framework) sub->add_option("--framework", c.framework, "U, AS or FI");
}

int cmd_run(const Common& c, int snapshot_every, bool record_timing) {
  Prepared p;
  GridMap map = GridMap::filled(1, 1, 0.0);
  try {
    p = prepare(c);
    map = map_or_config_error(p.config, 0, p.base_dir);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    RunOptions opts;
    opts.record_timing = record_timing;
    if (snapshot_every > 0) {
      opts.on_step = [&](int t, const Eigen::VectorXd& est, std::span<const Cell> traj) {
        if (t % snapshot_every != 0) return;
        char name[32];
        std::snprintf(name, sizeof(name), "step_%05d", t);
        const fs::path dir = p.out / "snapshots";
        write_file_atomic(dir / (std::string(name) + ".pgm"), heatmap_pgm(est, map.dims(), traj));
        write_file_atomic(dir / (std::string(name) + ".txt"), heatmap_legend(t));
      };
    }
    const RunResult r = run_scenario(p.config, map, p.codebook, opts);
    write_file_atomic(p.out / "trace.csv", trace_csv(r.trace, record_timing));
    write_file_atomic(p.out / "metrics.csv", metrics_csv(p.config.framework, p.config.seed, r.metrics));
    write_file_atomic(p.out / "scenario.ini", write_config_string(p.config));
    std::printf("framework=%s seed=%llu steps=%d reached=%s cost=%.6f bits=%lld\n", framework_name(p.config.framework),
                static_cast<unsigned long long>(p.config.seed), r.metrics.steps, r.metrics.reached ? "yes" : "no",
                r.metrics.cost, static_cast<long long>(r.metrics.bits));
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return 0;
}

int cmd_batch(const Common& c, int runs, const std::vector<std::string>& frameworks, int jobs) {
  Prepared p;
  std::vector<Framework> shown;
  try {
    if (runs <= 0) throw ConfigError("--runs", "must be positive");
    for (const auto& f : frameworks) shown.push_back(parse_framework(f));
    p = prepare(c);
    map_or_config_error(p.config, 0, p.base_dir);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    const auto batch = run_batch(
        p.config, [&](int i) { return load_map(p.config.map, i, p.base_dir); }, p.codebook, runs, jobs);
    std::vector<FrameworkSummary> rows;
    for (const auto& s : summarize(batch))
      if (std::find(shown.begin(), shown.end(), s.framework) != shown.end()) rows.push_back(s);
    const std::string table = summary_table(rows);
    write_file_atomic(p.out / "batch.csv", batch_csv(batch));
    write_file_atomic(p.out / "summary.txt", table);
    std::cout << table;
  } catch (const std::exception& e) {
    std::cerr << "batch failed: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return 0;
}

int cmd_timing(const Common& c, const std::vector<int>& horizons, int repeats) {
  Prepared p;
  GridMap map = GridMap::filled(1, 1, 0.0);
  try {
    if (horizons.empty()) throw ConfigError("--horizons", "need at least one horizon");
    for (int h : horizons)
      if (h < 0) throw ConfigError("--horizons", "horizons must be non-negative");
    p = prepare(c);
    map = map_or_config_error(p.config, 0, p.base_dir);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    const auto rows = run_timing_study(p.config, map, p.codebook, horizons, repeats);
    const std::string csv = timing_csv(rows);
    write_file_atomic(p.out / "timing.csv", csv);
    std::cout << csv;
  } catch (const std::exception& e) {
    std::cerr << "timing study failed: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return 0;
}

int cmd_synth(int rows, int cols, std::uint64_t seed, const std::string& out) {
  try {
    std::ostringstream s;
    write_text_matrix(s, smooth_obstacle_map(rows, cols, seed));
    write_file_atomic(out, s.str());
  } catch (const std::exception& e) {
    std::cerr << "synth failed: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return 0;
}

int cmd_codebook(const std::string& name) {
  try {
    write_codebook(std::cout, resolve_codebook(name));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-driven map compression simulator"};
  app.require_subcommand(1);

  Common run_opts;
  int snapshot_every = 0;
  bool record_timing = false;
  auto* run = app.add_subcommand("run", "Run one scenario and write trace.csv and metrics.csv");
  add_common(run, run_opts, true);
  run->add_option("--decoder", run_opts.decoder, "iterative or qp");
  run->add_option("--snapshot-every", snapshot_every, "Write an estimate heatmap every K steps")->check(CLI::NonNegativeNumber);
  run->add_flag("--record-timing", record_timing, "Fill the decoder_ms trace column (not reproducible)");

  Common batch_opts;
  int runs = 10;
  int jobs = 1;
  std::vector<std::string> frameworks{"U", "AS", "FI"};
  auto* batch = app.add_subcommand("batch", "Paired U/AS/FI runs over consecutive seeds");
  add_common(batch, batch_opts, false);
  batch->add_option("--runs", runs, "Number of seeds");
  batch->add_option("--frameworks", frameworks, "Rows to report")->delimiter(',');
  batch->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  Common timing_opts;
  std::vector<int> horizons{10, 20, 40, 80};
  auto* timing = app.add_subcommand("timing", "Mean per-step decoder time, iterative vs history QP");
  add_common(timing, timing_opts, true);
  timing->add_option("--horizons", horizons, "Sensor horizons")->delimiter(',');
  int repeats = 3;
  timing->add_option("--repeats", repeats, "Runs per configuration; the fastest mean is reported")->check(CLI::PositiveNumber);

  int synth_rows = 64, synth_cols = 64;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic obstacle map as a text matrix");
  synth->add_option("--rows", synth_rows)->check(CLI::PositiveNumber);
  synth->add_option("--cols", synth_cols)->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed);
  synth->add_option("output", synth_out)->required();

  std::string codebook_name = "builtin16";
  auto* codebook = app.add_subcommand("codebook", "Print a codebook in the text format");
  codebook->add_option("name", codebook_name, "builtin16, builtin7x7 or a file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  if (*run) return cmd_run(run_opts, snapshot_every, record_timing);
  if (*batch) return cmd_batch(batch_opts, runs, frameworks, jobs);
  if (*timing) return cmd_timing(timing_opts, horizons, repeats);
  if (*synth) return cmd_synth(synth_rows, synth_cols, synth_seed, synth_out);
  if (*codebook) return cmd_codebook(codebook_name);
  return kExitConfigError;
}
