#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "mapcomm/abstraction.hpp"
#include "mapcomm/grid_map.hpp"
#include "mapcomm/sim.hpp"

namespace mapcomm {

/// Bad configuration value; `field()` is "section.key".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_int(const std::string& field, const std::string& s) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError(field, "expected an integer, got '" + s + "'");
  return v;
}

inline double parse_real(const std::string& field, const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError(field, "expected a finite number, got '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& field, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(field, "expected true or false, got '" + s + "'");
}

inline Cell parse_cell(const std::string& field, const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError(field, "expected 'row,col', got '" + s + "'");
  return {parse_int<int>(field, trim(s.substr(0, comma))), parse_int<int>(field, trim(s.substr(comma + 1)))};
}

inline WindowShape parse_shape(const std::string& field, const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError(field, "expected 'WIDTHxHEIGHT', got '" + s + "'");
  WindowShape w{parse_int<int>(field, trim(s.substr(0, x))), parse_int<int>(field, trim(s.substr(x + 1)))};
  if (w.width <= 0 || w.height <= 0) throw ConfigError(field, "window sides must be positive");
  return w;
}

inline std::string cell_str(Cell c) { return std::to_string(c.row) + "," + std::to_string(c.col); }
inline std::string shape_str(WindowShape w) { return std::to_string(w.width) + "x" + std::to_string(w.height); }

}  // namespace detail

inline Framework parse_framework(const std::string& s) {
  if (s == "U" || s == "u") return Framework::kUninformed;
  if (s == "AS" || s == "as") return Framework::kAbstractionSelection;
  if (s == "FI" || s == "fi") return Framework::kFullyInformed;
  throw ConfigError("run.framework", "expected U, AS or FI, got '" + s + "'");
}

inline DecoderKind parse_decoder(const std::string& s) {
  if (s == "iterative") return DecoderKind::kIterative;
  if (s == "qp") return DecoderKind::kHistoryQp;
  throw ConfigError("run.decoder", "expected iterative or qp, got '" + s + "'");
}

/// INI-style scenario file: `[section]` headers, `key = value` lines, `#` or `;` comments.
/// Keys not given keep their defaults. Unknown sections or keys are errors.
inline ScenarioConfig parse_config(std::istream& in) {
  using namespace detail;
  ScenarioConfig c;
  std::string line, section;
  std::map<std::string, int> seen;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError("line " + std::to_string(lineno), "unterminated section header");
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string v = trim(body.substr(eq + 1));
    const std::string f = section + "." + key;
    if (seen[f]++) throw ConfigError(f, "given twice");

    if (f == "map.source") {
      if (v == "synthetic") c.map.kind = MapSpec::Kind::kSynthetic;
      else if (v == "file") c.map.kind = MapSpec::Kind::kFile;
      else throw ConfigError(f, "expected synthetic or file, got '" + v + "'");
    } else if (f == "map.path") {
      c.map.path = v;
    } else if (f == "map.format") {
      if (v == "text") c.map.format = RasterFormat::kTextMatrix;
      else if (v == "pgm") c.map.format = RasterFormat::kGraymap;
      else throw ConfigError(f, "expected text or pgm, got '" + v + "'");
    } else if (f == "map.depth") {
      c.map.depth = parse_bool(f, v);
    } else if (f == "map.neighborhood") {
      const int nb = parse_int<int>(f, v);
      if (nb != 4 && nb != 8) throw ConfigError(f, "expected 4 or 8");
      c.map.neighborhood = nb == 4 ? Neighborhood::kFour : Neighborhood::kEight;
    } else if (f == "map.rows") {
      c.map.rows = parse_int<int>(f, v);
    } else if (f == "map.cols") {
      c.map.cols = parse_int<int>(f, v);
    } else if (f == "map.seed") {
      c.map.seed = parse_int<std::uint64_t>(f, v);
    } else if (f == "map.reseed_per_run") {
      c.map.reseed_per_run = parse_bool(f, v);
    } else if (f == "run.framework") {
      c.framework = parse_framework(v);
    } else if (f == "run.decoder") {
      c.decoder = parse_decoder(v);
    } else if (f == "run.seed") {
      c.seed = parse_int<std::uint64_t>(f, v);
    } else if (f == "run.step_cap") {
      c.step_cap = parse_int<int>(f, v);
    } else if (f == "run.regularization") {
      c.regularization = parse_real(f, v);
    } else if (f == "actor.start") {
      c.actor.start = parse_cell(f, v);
    } else if (f == "actor.window") {
      c.actor.window = parse_shape(f, v);
    } else if (f == "actor.noise") {
      c.actor.noise = parse_real(f, v);
    } else if (f == "actor.movement_penalty") {
      c.actor.movement_penalty = parse_real(f, v);
    } else if (f == "actor.feasibility_threshold") {
      c.actor.feasibility_threshold = parse_real(f, v);
    } else if (f == "sensor.start") {
      c.sensor.start = parse_cell(f, v);
    } else if (f == "sensor.window") {
      c.sensor.window = parse_shape(f, v);
    } else if (f == "sensor.horizon") {
      c.sensor.horizon = parse_int<int>(f, v);
    } else if (f == "sensor.stripe_spacing") {
      c.sensor.stripe_spacing = parse_int<int>(f, v);
    } else if (f == "sensor.margin") {
      c.sensor.margin = parse_int<int>(f, v);
    } else if (f == "sensor.noise") {
      c.sensor.noise = parse_real(f, v);
    } else if (f == "sensor.codebook") {
      if (v.empty()) throw ConfigError(f, "must not be empty");
      c.sensor.codebook = v;
    } else if (f == "target.start") {
      c.target.start = parse_cell(f, v);
    } else if (f == "target.moving") {
      c.target.moving = parse_bool(f, v);
    } else if (f == "prior.mean") {
      c.prior.mean = parse_real(f, v);
    } else if (f == "prior.variance") {
      c.prior.variance = parse_real(f, v);
    } else if (f == "encoder.lambda") {
      c.encoder.lambda_coefficient = parse_real(f, v);
    } else if (f == "encoder.sigma") {
      c.encoder.sigma = parse_real(f, v);
    } else if (f == "encoder.weight_mode") {
      if (v == "squared") c.encoder.weight_mode = WeightMode::kSquared;
      else if (v == "linear") c.encoder.weight_mode = WeightMode::kLinear;
      else throw ConfigError(f, "expected squared or linear, got '" + v + "'");
    } else if (f == "encoder.allow_silence") {
      c.encoder.allow_silence = parse_bool(f, v);
    } else {
      throw ConfigError(f, "unknown key");
    }
  }
  if (c.map.kind == MapSpec::Kind::kFile && c.map.path.empty()) throw ConfigError("map.path", "required when map.source = file");
  if (c.map.kind == MapSpec::Kind::kSynthetic && (c.map.rows <= 0 || c.map.cols <= 0))
    throw ConfigError("map.rows", "synthetic map sides must be positive");
  return c;
}

inline ScenarioConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return parse_config(in);
}

/// Writes every field; parse_config(write_config(c)) == c.
inline void write_config(std::ostream& out, const ScenarioConfig& c) {
  using namespace detail;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  out << "[map]\n"
      << "source = " << (c.map.kind == MapSpec::Kind::kSynthetic ? "synthetic" : "file") << "\n";
  if (!c.map.path.empty()) out << "path = " << c.map.path << "\n";
  out << "format = " << (c.map.format == RasterFormat::kTextMatrix ? "text" : "pgm") << "\n"
      << "depth = " << b(c.map.depth) << "\n"
      << "neighborhood = " << (c.map.neighborhood == Neighborhood::kFour ? 4 : 8) << "\n"
      << "rows = " << c.map.rows << "\n"
      << "cols = " << c.map.cols << "\n"
      << "seed = " << c.map.seed << "\n"
      << "reseed_per_run = " << b(c.map.reseed_per_run) << "\n\n";
  out << "[run]\n"
      << "framework = " << framework_name(c.framework) << "\n"
      << "decoder = " << (c.decoder == DecoderKind::kIterative ? "iterative" : "qp") << "\n"
      << "seed = " << c.seed << "\n"
      << "step_cap = " << c.step_cap << "\n"
      << "regularization = " << format_double(c.regularization) << "\n\n";
  out << "[actor]\n"
      << "start = " << cell_str(c.actor.start) << "\n"
      << "window = " << shape_str(c.actor.window) << "\n"
      << "noise = " << format_double(c.actor.noise) << "\n"
      << "movement_penalty = " << format_double(c.actor.movement_penalty) << "\n"
      << "feasibility_threshold = " << format_double(c.actor.feasibility_threshold) << "\n\n";
  out << "[sensor]\n"
      << "start = " << cell_str(c.sensor.start) << "\n"
      << "window = " << shape_str(c.sensor.window) << "\n"
      << "horizon = " << c.sensor.horizon << "\n"
      << "stripe_spacing = " << c.sensor.stripe_spacing << "\n"
      << "margin = " << c.sensor.margin << "\n"
      << "noise = " << format_double(c.sensor.noise) << "\n"
      << "codebook = " << c.sensor.codebook << "\n\n";
  out << "[target]\n"
      << "start = " << cell_str(c.target.start) << "\n"
      << "moving = " << b(c.target.moving) << "\n\n";
  out << "[prior]\n"
      << "mean = " << format_double(c.prior.mean) << "\n"
      << "variance = " << format_double(c.prior.variance) << "\n\n";
  out << "[encoder]\n"
      << "lambda = " << format_double(c.encoder.lambda_coefficient) << "\n"
      << "sigma = " << format_double(c.encoder.sigma) << "\n"
      << "weight_mode = " << (c.encoder.weight_mode == WeightMode::kSquared ? "squared" : "linear") << "\n"
      << "allow_silence = " << b(c.encoder.allow_silence) << "\n";
}

inline std::string write_config_string(const ScenarioConfig& c) {
  std::ostringstream out;
  write_config(out, c);
  return out.str();
}

/// Resolves the map for batch run `run_index`. Relative paths are taken from `base_dir`.
inline GridMap load_map(const MapSpec& spec, int run_index = 0, const std::filesystem::path& base_dir = {}) {
  if (spec.kind == MapSpec::Kind::kSynthetic) {
    const std::uint64_t seed = spec.seed + (spec.reseed_per_run ? static_cast<std::uint64_t>(run_index) : 0);
    return smooth_obstacle_map(spec.rows, spec.cols, seed);
  }
  std::filesystem::path p = spec.path;
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  if (!spec.depth) return load_raster(p, spec.format);
  const RawRaster raw = read_raw_raster(p, spec.format);
  return depth_to_inclination(raw.rows, raw.cols, raw.values, spec.neighborhood).map;
}

/// "builtin16", "builtin7x7", or a codebook file path (relative to `base_dir`).
inline Codebook resolve_codebook(const std::string& name, const std::filesystem::path& base_dir = {}) {
  if (name == "builtin16") return builtin_codebook_16();
  if (name == "builtin7x7") return builtin_codebook_7x7();
  std::filesystem::path p = name;
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return load_codebook(p);
}

}  // namespace mapcomm
