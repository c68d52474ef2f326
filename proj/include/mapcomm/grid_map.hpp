#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mapcomm {

/// Grid position as (row, col).
struct Cell {
  int row = 0;
  int col = 0;

  auto operator<=>(const Cell&) const = default;
};

/// Raised when a raster or config file cannot be parsed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when parsed data is not usable (non-finite values and the like).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major index arithmetic for a rows x cols grid.
struct MapDims {
  int rows = 0;
  int cols = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }

  bool contains(Cell c) const { return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols; }

  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c.col);
  }

  Cell cell(std::size_t i) const {
    return {static_cast<int>(i / static_cast<std::size_t>(cols)), static_cast<int>(i % static_cast<std::size_t>(cols))};
  }

  bool operator==(const MapDims&) const = default;
};

/// Finest-resolution world map with values in [0,1], row-major.
/// Immutable after construction.
class GridMap {
 public:
  GridMap(int rows, int cols, std::vector<double> values) : dims_{rows, cols}, values_(std::move(values)) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("GridMap: dimensions must be positive");
    if (values_.size() != dims_.size()) throw std::invalid_argument("GridMap: value count does not match rows*cols");
    for (double v : values_) {
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("GridMap: cell value outside [0,1]");
    }
  }

  static GridMap filled(int rows, int cols, double value) {
    return GridMap(rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, value));
  }

  const MapDims& dims() const { return dims_; }
  int rows() const { return dims_.rows; }
  int cols() const { return dims_.cols; }
  int width() const { return dims_.cols; }
  int height() const { return dims_.rows; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double at(Cell c) const {
    if (!dims_.contains(c)) throw std::out_of_range("GridMap::at: cell outside map");
    return values_[dims_.index(c)];
  }
  std::span<const double> values() const { return values_; }

 private:
  MapDims dims_;
  std::vector<double> values_;
};

/// Cells sensed so far: true values where `mask` is set. `cells` keeps first-sensed order.
struct PartialMap {
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> cells;

  explicit PartialMap(std::size_t n = 0) : values(n, 0.0), mask(n, 0) {}

  bool has(std::size_t i) const { return mask[i] != 0; }

  void record(std::size_t i, double value) {
    values[i] = value;
    if (!mask[i]) {
      mask[i] = 1;
      cells.push_back(i);
    }
  }
};

/// Rectangular field of view clipped to the map. `cells` is row-major within the window.
struct Window {
  Cell center;
  int width = 0;
  int height = 0;
  Cell top_left;
  std::vector<std::size_t> cells;
};

/// Window of w columns by h rows centred on `center`; cells outside the map are dropped.
inline Window window_at(const MapDims& dims, Cell center, int w, int h) {
  if (!dims.contains(center)) throw std::invalid_argument("window_at: center outside map");
  if (w <= 0 || h <= 0) throw std::invalid_argument("window_at: window size must be positive");
  Window win;
  win.center = center;
  win.width = w;
  win.height = h;
  win.top_left = {center.row - h / 2, center.col - w / 2};
  const int r0 = std::max(win.top_left.row, 0);
  const int r1 = std::min(win.top_left.row + h, dims.rows);
  const int c0 = std::max(win.top_left.col, 0);
  const int c1 = std::min(win.top_left.col + w, dims.cols);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) win.cells.push_back(dims.index({r, c}));
  return win;
}

inline Window window_at(const GridMap& map, Cell center, int w, int h) { return window_at(map.dims(), center, w, h); }

/// Min-max rescale to [0,1]. Constant input maps to all zeros.
inline std::vector<double> rescale_unit(std::span<const double> raw) {
  std::vector<double> out(raw.size(), 0.0);
  if (raw.empty()) return out;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::clamp((raw[i] - *lo) / range, 0.0, 1.0);
  return out;
}

enum class RasterFormat { kTextMatrix, kGraymap };

/// Unnormalized raster as read from disk.
struct RawRaster {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
};

namespace detail {

inline double parse_number(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw FormatError("line " + std::to_string(line) + ": cannot parse '" + std::string(tok) + "' as a number");
  }
  if (!std::isfinite(v)) throw DataError("line " + std::to_string(line) + ": non-finite value '" + std::string(tok) + "'");
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// Text matrix: first line `rows cols`, then `rows` lines of `cols` values.
inline RawRaster parse_text_matrix(std::istream& in) {
  RawRaster r;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (!have_header) {
      if (toks.size() != 2) throw FormatError("line " + std::to_string(lineno) + ": expected header 'rows cols'");
      const double rows = detail::parse_number(toks[0], lineno);
      const double cols = detail::parse_number(toks[1], lineno);
      if (rows < 1 || cols < 1 || rows != std::floor(rows) || cols != std::floor(cols))
        throw FormatError("line " + std::to_string(lineno) + ": rows and cols must be positive integers");
      r.rows = static_cast<int>(rows);
      r.cols = static_cast<int>(cols);
      r.values.reserve(static_cast<std::size_t>(r.rows) * r.cols);
      have_header = true;
      continue;
    }
    if (r.values.size() == static_cast<std::size_t>(r.rows) * r.cols)
      throw FormatError("line " + std::to_string(lineno) + ": more rows than declared in header");
    if (toks.size() != static_cast<std::size_t>(r.cols))
      throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(r.cols) + " values, found " +
                        std::to_string(toks.size()));
    for (auto t : toks) r.values.push_back(detail::parse_number(t, lineno));
  }
  if (!have_header) throw FormatError("line " + std::to_string(lineno) + ": missing header 'rows cols'");
  if (r.values.size() != static_cast<std::size_t>(r.rows) * r.cols)
    throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(r.rows) + " rows, found " +
                      std::to_string(r.values.size() / r.cols));
  return r;
}

/// Binary graymap (P5, maxval <= 255). Samples are returned as v/255.
inline RawRaster parse_graymap(std::span<const unsigned char> bytes) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) { throw FormatError("byte " + std::to_string(pos) + ": " + what); };
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_ws();
    const std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1L << 24)) fail("header value too large");
      ++pos;
    }
    if (pos == start) fail("expected a decimal integer in graymap header");
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail("missing P5 magic");
  pos = 2;
  RawRaster r;
  r.cols = read_int();
  r.rows = read_int();
  const int maxval = read_int();
  if (r.cols <= 0 || r.rows <= 0) fail("graymap dimensions must be positive");
  if (maxval <= 0 || maxval > 255) fail("only 8-bit graymaps (maxval 1..255) are supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("expected whitespace after maxval");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(r.rows) * r.cols;
  if (bytes.size() - pos < n) {
    pos = bytes.size();
    fail("truncated pixel data: expected " + std::to_string(n) + " samples");
  }
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.values[i] = bytes[pos + i] / 255.0;
  return r;
}

inline RawRaster read_raw_raster(const std::filesystem::path& path, RasterFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open raster file '" + path.string() + "'");
  if (format == RasterFormat::kTextMatrix) return parse_text_matrix(in);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_graymap(bytes);
}

/// Reads a raster and rescales it to [0,1] by (v - min) / (max - min).
inline GridMap load_raster(const std::filesystem::path& path, RasterFormat format) {
  RawRaster raw = read_raw_raster(path, format);
  return GridMap(raw.rows, raw.cols, rescale_unit(raw.values));
}

enum class Neighborhood { kFour, kEight };

struct InclinationResult {
  GridMap map;
  bool flat = false;  // every z_j was equal; the map is all zeros
};

/// Sum of absolute depth differences to in-bounds neighbours, min-max normalized.
inline InclinationResult depth_to_inclination(int rows, int cols, std::span<const double> depth,
                                              Neighborhood nb = Neighborhood::kFour) {
  if (rows <= 0 || cols <= 0 || depth.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("depth_to_inclination: raster must be non-empty and match its dimensions");
  static constexpr int kFour[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  static constexpr int kEight[8][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  const std::span<const int[2]> offsets =
      nb == Neighborhood::kFour ? std::span<const int[2]>(kFour) : std::span<const int[2]>(kEight);
  const MapDims dims{rows, cols};
  std::vector<double> z(depth.size(), 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double y = depth[dims.index({r, c})];
      double sum = 0.0;
      for (const auto& d : offsets) {
        const Cell n{r + d[0], c + d[1]};
        if (dims.contains(n)) sum += std::abs(y - depth[dims.index(n)]);
      }
      z[dims.index({r, c})] = sum;
    }
  }
  const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
  const bool flat = !(*hi > *lo);
  return {GridMap(rows, cols, rescale_unit(z)), flat};
}

/// Smooth random terrain: a sum of Gaussian bumps, normalized to [0,1].
/// A share of the bumps are tall and narrow so the map has obstacle-like ridges.
inline GridMap smooth_obstacle_map(int rows, int cols, std::uint64_t seed, int bumps = 18) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("smooth_obstacle_map: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  const double scale = std::min(rows, cols);
  struct Bump {
    double r, c, s, h;
  };
  std::vector<Bump> list;
  for (int i = 0; i < bumps; ++i) {
    const bool obstacle = ur(rng) < 0.5;
    Bump b{ur(rng) * rows, ur(rng) * cols, (obstacle ? 0.03 + 0.04 * ur(rng) : 0.08 + 0.12 * ur(rng)) * scale,
           obstacle ? 1.0 : 0.25 + 0.25 * ur(rng)};
    list.push_back(b);
  }
  std::vector<double> v(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (const auto& b : list) {
        const double d2 = (r - b.r) * (r - b.r) + (c - b.c) * (c - b.c);
        s += b.h * std::exp(-d2 / (2.0 * b.s * b.s));
      }
      v[static_cast<std::size_t>(r) * cols + c] = s;
    }
  }
  auto unit = rescale_unit(v);
  // Sharpen so free space sits near zero and bump cores approach one.
  for (double& x : unit) x = x * x;
  return GridMap(rows, cols, std::move(unit));
}

/// Writes the text-matrix format read by parse_text_matrix.
inline void write_text_matrix(std::ostream& out, const GridMap& map) {
  out << map.rows() << ' ' << map.cols() << '\n';
  char buf[32];
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      auto res = std::to_chars(buf, buf + sizeof(buf), map.at({r, c}));
      if (c) out << ' ';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace mapcomm
