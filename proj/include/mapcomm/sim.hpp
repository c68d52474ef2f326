#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mapcomm/abstraction.hpp"
#include "mapcomm/channel.hpp"
#include "mapcomm/encoder.hpp"
#include "mapcomm/estimator.hpp"
#include "mapcomm/grid_map.hpp"
#include "mapcomm/oracle_qp.hpp"
#include "mapcomm/planner.hpp"
#include "mapcomm/relevance.hpp"

namespace mapcomm {

enum class Framework { kUninformed, kAbstractionSelection, kFullyInformed };
enum class DecoderKind { kIterative, kHistoryQp };

inline const char* framework_name(Framework f) {
  switch (f) {
    case Framework::kUninformed: return "U";
    case Framework::kAbstractionSelection: return "AS";
    case Framework::kFullyInformed: return "FI";
  }
  return "?";
}

/// Where the world map comes from.
struct MapSpec {
  enum class Kind { kSynthetic, kFile };
  Kind kind = Kind::kSynthetic;
  std::string path;
  RasterFormat format = RasterFormat::kTextMatrix;
  bool depth = false;  // file holds depth; convert to inclination
  Neighborhood neighborhood = Neighborhood::kFour;
  int rows = 128;
  int cols = 128;
  std::uint64_t seed = 7;
  bool reseed_per_run = false;  // batch run i uses seed + i
};

/// Everything a run needs. Defaults follow the moving-target Earth scenario.
struct ScenarioConfig {
  MapSpec map;
  Framework framework = Framework::kAbstractionSelection;
  DecoderKind decoder = DecoderKind::kIterative;

  struct Actor {
    Cell start{12, 57};
    WindowShape window{5, 5};
    double noise = 1e-6;
    double movement_penalty = 0.025;
    double feasibility_threshold = 0.501;
  } actor;

  struct Sensor {
    Cell start{46, 62};
    WindowShape window{15, 15};
    int horizon = 105;
    int stripe_spacing = 15;
    int margin = 7;
    double noise = 1e-5;
    std::string codebook = "builtin16";
  } sensor;

  struct Target {
    Cell start{90, 49};
    bool moving = true;
  } target;

  struct Prior {
    double mean = 0.5;
    double variance = 1.0;
  } prior;

  struct Encoder {
    double lambda_coefficient = 0.02;
    double sigma = 20.0;
    WeightMode weight_mode = WeightMode::kSquared;
    bool allow_silence = false;
  } encoder;

  double regularization = 1e-8;
  std::uint64_t seed = 1;
  int step_cap = 0;  // 0: 20 * (rows + cols)

  int effective_step_cap(const MapDims& dims) const { return step_cap > 0 ? step_cap : 20 * (dims.rows + dims.cols); }
};

/// Throws std::invalid_argument naming the offending field.
inline void validate(const ScenarioConfig& c, const MapDims& dims) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  need(dims.contains(c.actor.start), "actor.start: outside the map");
  need(dims.contains(c.sensor.start), "sensor.start: outside the map");
  need(dims.contains(c.target.start), "target.start: outside the map");
  need(c.actor.window.width > 0 && c.actor.window.height > 0, "actor.window: must be positive");
  need(c.sensor.window.width > 0 && c.sensor.window.height > 0, "sensor.window: must be positive");
  need(c.actor.noise >= 0.0, "actor.noise: must be non-negative");
  need(c.sensor.noise >= 0.0, "sensor.noise: must be non-negative");
  need(c.actor.movement_penalty > 0.0, "actor.movement_penalty: must be positive");
  need(c.actor.feasibility_threshold > c.prior.mean && c.actor.feasibility_threshold <= 1.0,
       "actor.feasibility_threshold: must lie in (prior.mean, 1]");
  need(c.prior.variance > 0.0, "prior.variance: must be positive");
  need(c.sensor.horizon >= 0, "sensor.horizon: must be non-negative");
  need(c.sensor.stripe_spacing > 0, "sensor.stripe_spacing: must be positive");
  need(c.sensor.margin >= 0, "sensor.margin: must be non-negative");
  need(c.encoder.lambda_coefficient >= 0.0, "encoder.lambda: must be non-negative");
  need(c.encoder.sigma > 0.0, "encoder.sigma: must be positive");
  need(c.regularization > 0.0, "run.regularization: must be positive");
  need(c.step_cap >= 0, "run.step_cap: must be non-negative");
}

/// Boustrophedon sweep: along the row to the edge, `stripe_spacing` cells
/// down (bouncing at the bottom/top), back along the row, and so on. One cell
/// per step, `horizon + 1` positions. `margin` keeps the sweep that far from
/// every map edge.
inline std::vector<Cell> lawnmower_path(Cell start, const MapDims& dims, int stripe_spacing, int horizon, int margin = 0) {
  if (horizon < 0) throw std::invalid_argument("lawnmower_path: negative horizon");
  if (stripe_spacing <= 0) throw std::invalid_argument("lawnmower_path: stripe spacing must be positive");
  const int rmin = margin, rmax = dims.rows - 1 - margin;
  const int cmin = margin, cmax = dims.cols - 1 - margin;
  if (rmin > rmax || cmin > cmax) throw std::invalid_argument("lawnmower_path: margin leaves no room on the map");
  if (start.row < rmin || start.row > rmax || start.col < cmin || start.col > cmax)
    throw std::invalid_argument("lawnmower_path: start outside the sweep area");

  std::vector<Cell> path{start};
  Cell cur = start;
  int hdir = 1, vdir = 1;
  bool horizontal = true;
  int vertical_left = 0;
  while (static_cast<int>(path.size()) < horizon + 1) {
    bool moved = false;
    for (int attempt = 0; attempt < 4 && !moved; ++attempt) {
      if (horizontal) {
        const int nc = cur.col + hdir;
        if (nc >= cmin && nc <= cmax) {
          cur.col = nc;
          moved = true;
        } else {
          horizontal = false;
          vertical_left = stripe_spacing;
        }
      } else {
        if (vertical_left == 0) {
          horizontal = true;
          hdir = -hdir;
          continue;
        }
        int nr = cur.row + vdir;
        if (nr < rmin || nr > rmax) {
          vdir = -vdir;
          nr = cur.row + vdir;
        }
        if (nr >= rmin && nr <= rmax) {
          cur.row = nr;
          --vertical_left;
          moved = true;
        } else {
          // Single-row sweep area: turn around horizontally.
          horizontal = true;
          hdir = -hdir;
        }
      }
    }
    path.push_back(cur);  // a 1x1 area simply repeats the start
  }
  return path;
}

/// Random walk over {UP, DOWN, LEFT, RIGHT, STAY}, moving only on even steps
/// and never leaving the map. Length horizon + 1.
inline std::vector<Cell> moving_target_trace(Cell start, const MapDims& dims, std::uint64_t seed, int horizon) {
  if (!dims.contains(start)) throw std::invalid_argument("moving_target_trace: start outside map");
  std::mt19937_64 rng = make_stream(seed, Stream::kTarget);
  std::vector<Cell> trace{start};
  Cell cur = start;
  for (int t = 1; t <= horizon; ++t) {
    if (t % 2 == 0) {
      std::vector<Cell> options{cur};
      for (const auto& mv : kMoves) {
        const Cell n{cur.row + mv[0], cur.col + mv[1]};
        if (dims.contains(n)) options.push_back(n);
      }
      std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
      cur = options[pick(rng)];
    }
    trace.push_back(cur);
  }
  return trace;
}

/// Sum of (x + a) over the cells actually traversed, duplicates included.
inline double accumulated_cost(std::span<const Cell> traversed, const GridMap& truth, double movement_penalty) {
  double c = 0.0;
  for (Cell p : traversed) c += truth.at(p) + movement_penalty;
  return c;
}

/// Mean of C(i) / C_max(i) over paired runs.
inline double cost_ratio(std::span<const std::pair<double, double>> runs) {
  if (runs.empty()) throw std::invalid_argument("cost_ratio: no runs");
  double s = 0.0;
  for (auto [c, cmax] : runs) {
    if (!(cmax > 0.0)) throw std::invalid_argument("cost_ratio: baseline cost must be positive");
    s += c / cmax;
  }
  return s / static_cast<double>(runs.size());
}

/// Mean of B(i) / B_max(i) over paired runs.
inline double bits_ratio(std::span<const std::pair<std::int64_t, std::int64_t>> runs) {
  if (runs.empty()) throw std::invalid_argument("bits_ratio: no runs");
  double s = 0.0;
  for (auto [b, bmax] : runs) {
    if (bmax <= 0) throw std::invalid_argument("bits_ratio: baseline bits must be positive");
    s += static_cast<double>(b) / static_cast<double>(bmax);
  }
  return s / static_cast<double>(runs.size());
}

inline double bits_ratio(std::int64_t bits, std::int64_t baseline) {
  const std::pair<std::int64_t, std::int64_t> one{bits, baseline};
  return bits_ratio(std::span(&one, 1));
}

/// Ratio as a percentage rounded to one decimal, e.g. 0.01583 -> "1.6".
inline std::string percent_1dp(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", std::round(ratio * 1000.0) / 10.0);
  return buf;
}

struct StepRecord {
  int t = 0;
  Cell actor;
  std::optional<Cell> sensor;  // empty once the Sensor has halted
  Cell target;
  std::optional<int> theta;    // template id; empty for no message
  bool raw = false;            // full raw window sent
  std::int64_t bits = 0;
  double plan_cost = 0.0;
  double decoder_ms = 0.0;
  std::size_t k = 0;
};

struct RunMetrics {
  double cost = 0.0;         // C, on true map values
  std::int64_t bits = 0;     // B
  int steps = 0;             // timesteps executed
  bool reached = false;
  std::vector<Cell> trajectory;
  std::vector<double> decoder_ms;

  double mean_decoder_ms() const {
    if (decoder_ms.empty()) return 0.0;
    return std::accumulate(decoder_ms.begin(), decoder_ms.end(), 0.0) / static_cast<double>(decoder_ms.size());
  }
};

struct RunResult {
  RunMetrics metrics;
  std::vector<StepRecord> trace;
};

struct RunOptions {
  bool record_timing = false;
  /// Called after each decode with the Actor's projected estimate and its trajectory so far.
  std::function<void(int t, const Eigen::VectorXd& estimate, std::span<const Cell> trajectory)> on_step;
};

/// One Actor-Sensor run. Per timestep: target moves (even steps); Actor senses;
/// Sensor senses, mirrors overlapping Actor measurements, selects and sends
/// (AS) or sends its raw window (FI); Actor decodes and replans; Actor moves
/// one cell. Ends on arrival or at the step cap.
inline RunResult run_scenario(const ScenarioConfig& cfg, const GridMap& truth, const Codebook& codebook,
                              const RunOptions& options = {}) {
  const MapDims& dims = truth.dims();
  validate(cfg, dims);
  const std::size_t n = dims.size();
  const int cap = cfg.effective_step_cap(dims);
  const bool as = cfg.framework == Framework::kAbstractionSelection;
  const bool fi = cfg.framework == Framework::kFullyInformed;
  if (as) {
    codebook.validate();
    if (!(codebook.window == cfg.sensor.window))
      throw std::invalid_argument("sensor.codebook: template window does not match sensor.window");
  }

  const std::vector<Cell> sweep =
      (as || fi) ? lawnmower_path(cfg.sensor.start, dims, cfg.sensor.stripe_spacing, cfg.sensor.horizon, cfg.sensor.margin)
                 : std::vector<Cell>{cfg.sensor.start};
  const std::vector<Cell> target_trace = cfg.target.moving ? moving_target_trace(cfg.target.start, dims, cfg.seed, cap)
                                                           : std::vector<Cell>(static_cast<std::size_t>(cap) + 1, cfg.target.start);
  std::mt19937_64 actor_rng = make_stream(cfg.seed, Stream::kActorPerception);
  std::mt19937_64 channel_rng = make_stream(cfg.seed, Stream::kChannel);
  const NoiseModel actor_noise{cfg.actor.noise, cfg.regularization};
  const NoiseModel channel_noise{cfg.sensor.noise, cfg.regularization};
  const PlannerParams planner{cfg.actor.movement_penalty, cfg.actor.feasibility_threshold, n};
  const EncoderParams encoder{cfg.encoder.lambda_coefficient, cfg.encoder.weight_mode, cfg.encoder.allow_silence};

  BeliefState actor_belief(n, cfg.prior.mean, cfg.prior.variance);
  std::optional<BeliefState> sensor_belief;
  if (as) sensor_belief.emplace(n, cfg.prior.mean, cfg.prior.variance);
  std::optional<HistoryStack> history;
  if (cfg.decoder == DecoderKind::kHistoryQp)
    history.emplace(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), cfg.prior.mean));
  Eigen::VectorXd qp_estimate;

  PartialMap sensed(n);
  std::vector<int> actor_seen(n, 0);  // Actor measurements per cell
  std::vector<int> mirrored(n, 0);    // of those, replayed on the Sensor
  std::vector<Cell> shared_plan = straight_line_path(cfg.actor.start, cfg.target.start);

  RunResult out;
  RunMetrics& m = out.metrics;
  Cell pos = cfg.actor.start;
  m.trajectory.push_back(pos);
  if (pos == target_trace[0]) {
    m.reached = true;
    m.cost = accumulated_cost(m.trajectory, truth, cfg.actor.movement_penalty);
    return out;
  }

  for (int t = 0; t < cap; ++t) {
    StepRecord rec;
    rec.t = t;
    rec.actor = pos;
    const Cell target = target_trace[static_cast<std::size_t>(t)];
    rec.target = target;

    // Actor perception.
    const Window actor_window = window_at(dims, pos, cfg.actor.window.width, cfg.actor.window.height);
    Measurement actor_meas;
    actor_meas.op = raw_window_operator(actor_window, dims);
    actor_meas.values = add_gaussian_noise(actor_meas.op.apply(truth.values()), cfg.actor.noise, actor_rng);
    for (std::size_t c : actor_window.cells) ++actor_seen[c];

    // Sensor perception and transmission.
    std::optional<Measurement> message;
    if ((as || fi) && t < cfg.sensor.horizon) {
      const Cell spos = sweep[static_cast<std::size_t>(t)];
      rec.sensor = spos;
      const Window sensor_window = window_at(dims, spos, cfg.sensor.window.width, cfg.sensor.window.height);
      for (std::size_t c : sensor_window.cells) sensed.record(c, truth[c]);

      if (as) {
        std::vector<OverlapObservation> overlap;
        auto consider = [&](std::size_t c) {
          if (sensed.has(c) && actor_seen[c] > mirrored[c]) {
            overlap.push_back({c, actor_seen[c] - mirrored[c]});
            mirrored[c] = actor_seen[c];
          }
        };
        for (std::size_t c : actor_window.cells) consider(c);
        for (std::size_t c : sensor_window.cells) consider(c);
        std::sort(overlap.begin(), overlap.end(), [](const auto& a, const auto& b) { return a.cell < b.cell; });
        sensor_decode_step(*sensor_belief, sensed, overlap, actor_noise, nullptr, channel_noise);

        const WeightField weights = path_weights(shared_plan, dims, cfg.encoder.sigma);
        SelectionResult sel =
            select_abstraction(*sensor_belief, sensed, weights, spos, dims, codebook, encoder, channel_noise);
        if (!sel.silent()) {
          sensor_decode_step(*sensor_belief, sensed, {}, actor_noise, &sel.message, channel_noise);
          const Transmission tx =
              transmit(sel.message.values, sel.message.op.source(), codebook, cfg.sensor.noise, channel_rng);
          rec.theta = sel.theta;
          rec.k = sel.k();
          rec.bits = tx.bits;
          message = Measurement{std::move(sel.message.op), tx.payload};
        }
      } else {
        ObservationOperator op = raw_window_operator(sensor_window, dims);
        const Transmission tx = transmit(op.apply(truth.values()), op.source(), codebook, cfg.sensor.noise, channel_rng);
        rec.raw = true;
        rec.k = op.rows();
        rec.bits = tx.bits;
        message = Measurement{std::move(op), tx.payload};
      }
    }
    m.bits += rec.bits;

    // Actor decoder.
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.decoder == DecoderKind::kIterative) {
      actor_decode_step(actor_belief, actor_meas, actor_noise, message ? &*message : nullptr, channel_noise);
    } else {
      history->push(actor_meas.op, actor_meas.values);
      if (message) history->push(message->op, message->values);
      qp_estimate = solve_history_qp(*history).x;
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (options.record_timing) {
      rec.decoder_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      m.decoder_ms.push_back(rec.decoder_ms);
    }
    const Eigen::VectorXd& estimate = cfg.decoder == DecoderKind::kIterative ? actor_belief.mean() : qp_estimate;

    // Planning and motion.
    const Path path = plan(std::span<const double>(estimate.data(), n), dims, pos, target, planner);
    rec.plan_cost = path.cost;
    shared_plan = path.cells;
    if (options.on_step) options.on_step(t, estimate, m.trajectory);
    if (path.cells.size() > 1) pos = path.cells[1];
    m.trajectory.push_back(pos);
    out.trace.push_back(rec);
    m.steps = t + 1;
    if (pos == target) {
      m.reached = true;
      break;
    }
  }
  m.cost = accumulated_cost(m.trajectory, truth, cfg.actor.movement_penalty);
  return out;
}

/// Paired U / AS / FI runs sharing map, seed and target trace.
struct PairedRun {
  std::uint64_t seed = 0;
  RunMetrics uninformed;
  RunMetrics selection;
  RunMetrics informed;
};

struct FrameworkSummary {
  Framework framework;
  double mean_cost = 0.0, std_cost = 0.0;
  double mean_bits = 0.0, std_bits = 0.0;
  double r_cost = 0.0, r_bits = 0.0;
  int reached = 0;
  int runs = 0;
};

/// Population mean and standard deviation.
inline std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

inline std::vector<FrameworkSummary> summarize(std::span<const PairedRun> runs) {
  std::vector<FrameworkSummary> out;
  for (Framework f : {Framework::kUninformed, Framework::kAbstractionSelection, Framework::kFullyInformed}) {
    FrameworkSummary s{f};
    std::vector<double> costs, bits;
    std::vector<std::pair<double, double>> cpairs;
    std::vector<std::pair<std::int64_t, std::int64_t>> bpairs;
    for (const auto& r : runs) {
      const RunMetrics& mm = f == Framework::kUninformed ? r.uninformed
                             : f == Framework::kAbstractionSelection ? r.selection
                                                                     : r.informed;
      costs.push_back(mm.cost);
      bits.push_back(static_cast<double>(mm.bits));
      cpairs.emplace_back(mm.cost, r.uninformed.cost);
      bpairs.emplace_back(mm.bits, r.informed.bits);
      s.reached += mm.reached ? 1 : 0;
    }
    s.runs = static_cast<int>(runs.size());
    std::tie(s.mean_cost, s.std_cost) = mean_std(costs);
    std::tie(s.mean_bits, s.std_bits) = mean_std(bits);
    s.r_cost = runs.empty() ? 0.0 : cost_ratio(cpairs);
    const bool informed_sent = std::all_of(runs.begin(), runs.end(), [](const PairedRun& r) { return r.informed.bits > 0; });
    s.r_bits = (runs.empty() || !informed_sent) ? std::nan("") : bits_ratio(bpairs);
    out.push_back(s);
  }
  return out;
}

/// Runs `count` paired seeds (seed, seed+1, ...) on `jobs` worker threads.
/// `map_for` supplies the world map for a run index.
inline std::vector<PairedRun> run_batch(const ScenarioConfig& base, const std::function<GridMap(int)>& map_for,
                                        const Codebook& codebook, int count, int jobs = 1) {
  if (count <= 0) throw std::invalid_argument("run_batch: run count must be positive");
  std::vector<PairedRun> out(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        const GridMap map = map_for(i);
        ScenarioConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(i);
        PairedRun& pr = out[static_cast<std::size_t>(i)];
        pr.seed = cfg.seed;
        cfg.framework = Framework::kUninformed;
        pr.uninformed = run_scenario(cfg, map, codebook).metrics;
        cfg.framework = Framework::kAbstractionSelection;
        pr.selection = run_scenario(cfg, map, codebook).metrics;
        cfg.framework = Framework::kFullyInformed;
        pr.informed = run_scenario(cfg, map, codebook).metrics;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(jobs, count));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

struct TimingRow {
  int horizon = 0;
  DecoderKind decoder = DecoderKind::kIterative;
  double mean_ms = 0.0;  // mean over all steps of a run, best of the repeats
  int steps = 0;
};

/// Mean per-step Actor decoder time for each Sensor horizon, iterative vs history QP.
/// Each configuration runs `repeats` times; the smallest mean is kept.
inline std::vector<TimingRow> run_timing_study(const ScenarioConfig& base, const GridMap& map, const Codebook& codebook,
                                               std::span<const int> horizons, int repeats = 3) {
  if (repeats < 1) throw std::invalid_argument("run_timing_study: repeats must be positive");
  std::vector<TimingRow> rows;
  for (int h : horizons) {
    for (DecoderKind d : {DecoderKind::kIterative, DecoderKind::kHistoryQp}) {
      ScenarioConfig cfg = base;
      cfg.sensor.horizon = h;
      cfg.decoder = d;
      RunOptions opts;
      opts.record_timing = true;
      TimingRow row{h, d, std::numeric_limits<double>::infinity(), 0};
      for (int r = 0; r < repeats; ++r) {
        const RunResult res = run_scenario(cfg, map, codebook, opts);
        row.mean_ms = std::min(row.mean_ms, res.metrics.mean_decoder_ms());
        row.steps = res.metrics.steps;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace mapcomm
