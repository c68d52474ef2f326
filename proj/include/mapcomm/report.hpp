#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include <Eigen/Dense>

#include "mapcomm/grid_map.hpp"
#include "mapcomm/sim.hpp"

namespace mapcomm {

/// Writes to `path.tmp` and renames over `path`, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

namespace detail {

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace detail

/// Per-step CSV. decoder_ms is blank unless timing was recorded.
inline std::string trace_csv(std::span<const StepRecord> trace, bool with_timing) {
  std::ostringstream out;
  out << "t,actor_row,actor_col,sensor_row,sensor_col,target_row,target_col,theta,k,bits,plan_cost,decoder_ms\n";
  for (const auto& r : trace) {
    out << r.t << ',' << r.actor.row << ',' << r.actor.col << ',';
    if (r.sensor)
      out << r.sensor->row << ',' << r.sensor->col << ',';
    else
      out << ",,";
    out << r.target.row << ',' << r.target.col << ',';
    if (r.raw)
      out << "raw";
    else if (r.theta)
      out << *r.theta;
    out << ',' << r.k << ',' << r.bits << ',' << detail::fmt(r.plan_cost) << ',';
    if (with_timing) out << detail::fmt(r.decoder_ms, "%.3f");
    out << '\n';
  }
  return out.str();
}

inline std::string metrics_csv(Framework f, std::uint64_t seed, const RunMetrics& m) {
  std::ostringstream out;
  out << "framework,seed,cost,bits,steps,reached\n"
      << framework_name(f) << ',' << seed << ',' << detail::fmt(m.cost) << ',' << m.bits << ',' << m.steps << ','
      << (m.reached ? 1 : 0) << '\n';
  return out.str();
}

/// 8-bit graymap of an estimate: values map to 0..200, traversed cells are 255.
inline std::string heatmap_pgm(const Eigen::VectorXd& estimate, const MapDims& dims, std::span<const Cell> traversed) {
  if (static_cast<std::size_t>(estimate.size()) != dims.size()) throw std::invalid_argument("heatmap_pgm: size mismatch");
  std::string body(dims.size(), '\0');
  for (std::size_t i = 0; i < dims.size(); ++i)
    body[i] = static_cast<char>(std::lround(std::clamp(estimate[static_cast<Eigen::Index>(i)], 0.0, 1.0) * 200.0));
  for (Cell c : traversed)
    if (dims.contains(c)) body[dims.index(c)] = static_cast<char>(255);
  return "P5\n" + std::to_string(dims.cols) + " " + std::to_string(dims.rows) + "\n255\n" + body;
}

inline std::string heatmap_legend(int t) {
  return "heatmap at step " + std::to_string(t) +
         "\nencoding: gray = round(200 * clamp(estimate, 0, 1)); 255 = cell traversed by the Actor\n";
}

inline std::string summary_table(std::span<const FrameworkSummary> rows) {
  std::ostringstream out;
  out << "framework  runs  reached  cost_mean    cost_std   bits_mean     bits_std    r_cost%  r_bits%\n";
  for (const auto& s : rows) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-9s  %4d  %7d  %9.3f  %9.3f  %10.1f  %10.1f  %7s  %7s\n",
                  framework_name(s.framework), s.runs, s.reached, s.mean_cost, s.std_cost, s.mean_bits, s.std_bits,
                  percent_1dp(s.r_cost).c_str(), std::isnan(s.r_bits) ? "n/a" : percent_1dp(s.r_bits).c_str());
    out << line;
  }
  return out.str();
}

inline std::string batch_csv(std::span<const PairedRun> runs) {
  std::ostringstream out;
  out << "seed,framework,cost,bits,steps,reached\n";
  for (const auto& r : runs) {
    const std::pair<Framework, const RunMetrics*> rows[] = {{Framework::kUninformed, &r.uninformed},
                                                            {Framework::kAbstractionSelection, &r.selection},
                                                            {Framework::kFullyInformed, &r.informed}};
    for (const auto& [f, m] : rows)
      out << r.seed << ',' << framework_name(f) << ',' << detail::fmt(m->cost) << ',' << m->bits << ',' << m->steps << ','
          << (m->reached ? 1 : 0) << '\n';
  }
  return out.str();
}

inline std::string timing_csv(std::span<const TimingRow> rows) {
  std::ostringstream out;
  out << "horizon,decoder,mean_ms,steps\n";
  for (const auto& r : rows)
    out << r.horizon << ',' << (r.decoder == DecoderKind::kIterative ? "iterative" : "qp") << ','
        << detail::fmt(r.mean_ms, "%.4f") << ',' << r.steps << '\n';
  return out.str();
}

}  // namespace mapcomm
