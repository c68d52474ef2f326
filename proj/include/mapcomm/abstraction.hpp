#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "mapcomm/grid_map.hpp"

namespace mapcomm {

struct WindowShape {
  int width = 0;   // columns
  int height = 0;  // rows

  int cells() const { return width * height; }
  bool operator==(const WindowShape&) const = default;
};

/// One compressed cell per block; a block's value is the average of its cells.
/// Blocks are disjoint and need not cover the window.
struct AbstractionTemplate {
  int id = 0;
  WindowShape window;
  std::vector<std::vector<Cell>> blocks;  // window-relative (row, col)

  std::size_t k() const { return blocks.size(); }

  void validate() const {
    if (window.width <= 0 || window.height <= 0) throw std::invalid_argument("template " + std::to_string(id) + ": bad window");
    std::set<Cell> seen;
    for (const auto& block : blocks) {
      if (block.empty()) throw std::invalid_argument("template " + std::to_string(id) + ": empty block");
      for (Cell c : block) {
        if (c.row < 0 || c.row >= window.height || c.col < 0 || c.col >= window.width)
          throw std::invalid_argument("template " + std::to_string(id) + ": block cell outside window");
        if (!seen.insert(c).second)
          throw std::invalid_argument("template " + std::to_string(id) + ": blocks overlap");
      }
    }
  }
};

/// Templates agreed on by both agents, plus the bit prices of a transmission.
struct Codebook {
  WindowShape window;
  std::vector<AbstractionTemplate> templates;
  int bits_per_measurement = 12;  // n_m
  int bits_per_index = 4;         // n_a

  const AbstractionTemplate* find(int id) const {
    for (const auto& t : templates)
      if (t.id == id) return &t;
    return nullptr;
  }

  std::size_t max_k() const {
    std::size_t m = 0;
    for (const auto& t : templates) m = std::max(m, t.k());
    return m;
  }

  void validate() const {
    if (templates.empty()) throw std::invalid_argument("codebook has no templates");
    std::set<int> ids;
    for (const auto& t : templates) {
      if (!(t.window == window)) throw std::invalid_argument("template " + std::to_string(t.id) + ": window differs from codebook");
      if (!ids.insert(t.id).second) throw std::invalid_argument("duplicate template id " + std::to_string(t.id));
      t.validate();
    }
    if (bits_per_measurement < 0 || bits_per_index < 0) throw std::invalid_argument("bit counts must be non-negative");
    const int need = static_cast<int>(std::ceil(std::log2(static_cast<double>(templates.size()))));
    if (bits_per_index < need)
      throw std::invalid_argument("n_a = " + std::to_string(bits_per_index) + " cannot index " +
                                  std::to_string(templates.size()) + " templates");
  }
};

struct OperatorSource {
  enum class Kind { kTemplate, kRaw };
  Kind kind = Kind::kRaw;
  int template_id = -1;
  Cell position;

  bool is_raw() const { return kind == Kind::kRaw; }
};

/// Row of an averaging operator: equal weights 1/|cells| over `cells`.
struct AveragingRow {
  std::vector<std::size_t> cells;

  double coefficient() const { return 1.0 / static_cast<double>(cells.size()); }
};

/// Sparse linear observation map R^N -> R^k whose rows are block averages.
class ObservationOperator {
 public:
  ObservationOperator() = default;
  ObservationOperator(std::size_t cols, std::vector<AveragingRow> rows, OperatorSource source = {})
      : cols_(cols), rows_(std::move(rows)), source_(source) {
    for (const auto& r : rows_) {
      if (r.cells.empty()) throw std::invalid_argument("ObservationOperator: empty row");
      for (std::size_t c : r.cells)
        if (c >= cols_) throw std::invalid_argument("ObservationOperator: column index out of range");
      std::vector<std::size_t> sorted = r.cells;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("ObservationOperator: repeated cell within a row");
    }
  }

  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return cols_; }
  const AveragingRow& row(std::size_t i) const { return rows_[i]; }
  const std::vector<AveragingRow>& row_list() const { return rows_; }
  const OperatorSource& source() const { return source_; }

  Eigen::VectorXd apply(std::span<const double> x) const {
    if (x.size() != cols_) throw std::invalid_argument("ObservationOperator::apply: dimension mismatch");
    Eigen::VectorXd o(static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      double s = 0.0;
      for (std::size_t c : rows_[i].cells) s += x[c];
      o[static_cast<Eigen::Index>(i)] = s * rows_[i].coefficient();
    }
    return o;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return apply(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  /// Sorted distinct columns with a nonzero entry.
  std::vector<std::size_t> support() const {
    std::vector<std::size_t> s;
    for (const auto& r : rows_) s.insert(s.end(), r.cells.begin(), r.cells.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  Eigen::SparseMatrix<double, Eigen::RowMajor> to_sparse() const {
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t i = 0; i < rows_.size(); ++i)
      for (std::size_t c : rows_[i].cells)
        trips.emplace_back(static_cast<int>(i), static_cast<int>(c), rows_[i].coefficient());
    Eigen::SparseMatrix<double, Eigen::RowMajor> m(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(cols_));
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
  }

 private:
  std::size_t cols_ = 0;
  std::vector<AveragingRow> rows_;
  OperatorSource source_;
};

/// Places a template at `sensor_pos`. Cells off the map are clipped; blocks clipped
/// to nothing are dropped, so k can shrink near borders.
inline ObservationOperator instantiate_operator(const AbstractionTemplate& tmpl, const MapDims& dims, Cell sensor_pos) {
  if (!dims.contains(sensor_pos)) throw std::invalid_argument("instantiate_operator: sensor position outside map");
  const Cell top_left{sensor_pos.row - tmpl.window.height / 2, sensor_pos.col - tmpl.window.width / 2};
  std::vector<AveragingRow> rows;
  rows.reserve(tmpl.blocks.size());
  for (const auto& block : tmpl.blocks) {
    AveragingRow row;
    for (Cell rel : block) {
      const Cell abs{top_left.row + rel.row, top_left.col + rel.col};
      if (dims.contains(abs)) row.cells.push_back(dims.index(abs));
    }
    if (!row.cells.empty()) rows.push_back(std::move(row));
  }
  return ObservationOperator(dims.size(), std::move(rows),
                             {OperatorSource::Kind::kTemplate, tmpl.id, sensor_pos});
}

/// One singleton row per window cell.
inline ObservationOperator raw_window_operator(const Window& window, const MapDims& dims) {
  std::vector<AveragingRow> rows;
  rows.reserve(window.cells.size());
  for (std::size_t c : window.cells) rows.push_back({{c}});
  return ObservationOperator(dims.size(), std::move(rows), {OperatorSource::Kind::kRaw, -1, window.center});
}

/// Transmission size: k*n_m plus n_a when a template index is sent.
inline std::int64_t bits_for(std::size_t k, bool raw, const Codebook& codebook) {
  const auto base = static_cast<std::int64_t>(k) * codebook.bits_per_measurement;
  return raw ? base : base + codebook.bits_per_index;
}

inline std::int64_t bits_for(const ObservationOperator& op, const Codebook& codebook) {
  return bits_for(op.rows(), op.source().is_raw(), codebook);
}

namespace detail {

/// Tiles [r0,r1) x [c0,c1) with blocks; `row_cuts`/`col_cuts` are interior boundaries.
inline void add_tiling(std::vector<std::vector<Cell>>& blocks, int r0, int r1, int c0, int c1, std::vector<int> row_cuts,
                       std::vector<int> col_cuts) {
  row_cuts.insert(row_cuts.begin(), r0);
  row_cuts.push_back(r1);
  col_cuts.insert(col_cuts.begin(), c0);
  col_cuts.push_back(c1);
  for (std::size_t i = 0; i + 1 < row_cuts.size(); ++i) {
    for (std::size_t j = 0; j + 1 < col_cuts.size(); ++j) {
      std::vector<Cell> b;
      for (int r = row_cuts[i]; r < row_cuts[i + 1]; ++r)
        for (int c = col_cuts[j]; c < col_cuts[j + 1]; ++c) b.push_back({r, c});
      blocks.push_back(std::move(b));
    }
  }
}

inline std::vector<int> even_cuts(int lo, int hi, int step) {
  std::vector<int> cuts;
  for (int x = lo + step; x < hi; x += step) cuts.push_back(x);
  return cuts;
}

inline void add_singletons(std::vector<std::vector<Cell>>& blocks, int r0, int r1, int c0, int c1) {
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) blocks.push_back({{r, c}});
}

}  // namespace detail

/// The 16-template set for a 15x15 window. Layouts are listed in docs/codebook.md.
inline Codebook builtin_codebook_16() {
  using detail::add_singletons;
  using detail::add_tiling;
  using detail::even_cuts;
  constexpr int W = 15;
  Codebook cb;
  cb.window = {W, W};
  cb.bits_per_measurement = 12;
  cb.bits_per_index = 4;
  auto make = [&](int id) -> AbstractionTemplate& {
    cb.templates.push_back({id, cb.window, {}});
    return cb.templates.back();
  };
  add_singletons(make(1).blocks, 0, W, 0, W);                                    // full resolution, k=225
  add_tiling(make(2).blocks, 0, W, 0, W, even_cuts(0, W, 3), even_cuts(0, W, 3));  // 3x3 blocks, k=25
  {
    auto& b = make(3).blocks;  // fine centre, 5x5 ring, k=33
    add_singletons(b, 5, 10, 5, 10);
    for (int br = 0; br < 3; ++br)
      for (int bc = 0; bc < 3; ++bc)
        if (br != 1 || bc != 1) add_tiling(b, 5 * br, 5 * br + 5, 5 * bc, 5 * bc + 5, {}, {});
  }
  add_tiling(make(4).blocks, 0, W, 0, W, even_cuts(0, W, 1), {});                  // row stripes, k=15
  add_tiling(make(5).blocks, 0, W, 0, W, {}, even_cuts(0, W, 1));                  // column stripes, k=15
  add_tiling(make(6).blocks, 0, W, 0, W, even_cuts(0, W, 5), even_cuts(0, W, 5));  // 5x5 blocks, k=9
  add_tiling(make(7).blocks, 0, W, 0, W, {}, {});                                  // full average, k=1
  add_tiling(make(8).blocks, 0, W, 0, W, {}, {7});                                 // left/right halves, k=2
  add_tiling(make(9).blocks, 0, W, 0, W, {7}, {});                                 // top/bottom halves, k=2
  add_singletons(make(10).blocks, 5, 10, 5, 10);                                   // centre only, k=25
  add_tiling(make(11).blocks, 3, 12, 3, 12, {6, 9}, {6, 9});                       // centre 9x9 in 3x3, k=9
  add_singletons(make(12).blocks, 0, 5, 0, W);                                     // north band, k=75
  add_singletons(make(13).blocks, 10, W, 0, W);                                    // south band, k=75
  add_singletons(make(14).blocks, 0, W, 0, 5);                                     // west band, k=75
  add_singletons(make(15).blocks, 0, W, 10, W);                                    // east band, k=75
  {
    auto& b = make(16).blocks;  // cross of 5x5 blocks, k=5
    add_tiling(b, 0, 5, 5, 10, {}, {});
    add_tiling(b, 5, 10, 0, 5, {}, {});
    add_tiling(b, 5, 10, 5, 10, {}, {});
    add_tiling(b, 5, 10, 10, 15, {}, {});
    add_tiling(b, 10, 15, 5, 10, {}, {});
  }
  return cb;
}

/// Ten templates on a 7x7 window, used by the decoder timing study.
inline Codebook builtin_codebook_7x7() {
  using detail::add_singletons;
  using detail::add_tiling;
  constexpr int W = 7;
  Codebook cb;
  cb.window = {W, W};
  cb.bits_per_measurement = 12;
  cb.bits_per_index = 4;
  auto make = [&](int id) -> AbstractionTemplate& {
    cb.templates.push_back({id, cb.window, {}});
    return cb.templates.back();
  };
  add_singletons(make(1).blocks, 0, W, 0, W);
  add_tiling(make(2).blocks, 0, W, 0, W, {}, {});
  add_tiling(make(3).blocks, 0, W, 0, W, detail::even_cuts(0, W, 1), {});
  add_tiling(make(4).blocks, 0, W, 0, W, {}, detail::even_cuts(0, W, 1));
  add_tiling(make(5).blocks, 0, W, 0, W, {2, 5}, {2, 5});
  {
    auto& b = make(6).blocks;
    add_singletons(b, 2, 5, 2, 5);
    const int cuts[4] = {0, 2, 5, 7};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != 1 || j != 1) add_tiling(b, cuts[i], cuts[i + 1], cuts[j], cuts[j + 1], {}, {});
  }
  add_tiling(make(7).blocks, 0, W, 0, W, {}, {4});
  add_tiling(make(8).blocks, 0, W, 0, W, {4}, {});
  add_singletons(make(9).blocks, 2, 5, 2, 5);
  add_tiling(make(10).blocks, 0, W, 0, W, {4}, {4});
  return cb;
}

/// Codebook text format:
///
///     window <width> <height>
///     bits <n_m> <n_a>    (optional, default 12 4)
///     template <id>
///     r,c r,c ...      (one line per block, window-relative cells)
///
/// Blank lines and text after '#' are ignored.
inline Codebook parse_codebook(std::istream& in) {
  Codebook cb;
  bool have_window = false;
  AbstractionTemplate* current = nullptr;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) { throw FormatError("codebook line " + std::to_string(lineno) + ": " + what); };
  auto to_int = [&](std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail("expected an integer, found '" + std::string(s) + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "window") {
      if (toks.size() != 3) fail("expected 'window <width> <height>'");
      cb.window = {to_int(toks[1]), to_int(toks[2])};
      have_window = true;
    } else if (toks[0] == "bits") {
      if (toks.size() != 3) fail("expected 'bits <n_m> <n_a>'");
      cb.bits_per_measurement = to_int(toks[1]);
      cb.bits_per_index = to_int(toks[2]);
    } else if (toks[0] == "template") {
      if (!have_window) fail("'window' must precede the first template");
      if (toks.size() != 2) fail("expected 'template <id>'");
      cb.templates.push_back({to_int(toks[1]), cb.window, {}});
      current = &cb.templates.back();
    } else {
      if (!current) fail("block listed before any 'template' header");
      std::vector<Cell> block;
      for (auto t : toks) {
        auto comma = t.find(',');
        if (comma == std::string_view::npos) fail("expected 'row,col', found '" + std::string(t) + "'");
        const Cell c{to_int(t.substr(0, comma)), to_int(t.substr(comma + 1))};
        if (c.row < 0 || c.row >= cb.window.height || c.col < 0 || c.col >= cb.window.width)
          fail("cell " + std::string(t) + " lies outside the window");
        block.push_back(c);
      }
      current->blocks.push_back(std::move(block));
    }
  }
  if (!have_window) fail("missing 'window' line");
  try {
    cb.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("codebook: ") + e.what());
  }
  return cb;
}

inline void write_codebook(std::ostream& out, const Codebook& cb) {
  out << "window " << cb.window.width << ' ' << cb.window.height << '\n';
  out << "bits " << cb.bits_per_measurement << ' ' << cb.bits_per_index << '\n';
  for (const auto& t : cb.templates) {
    out << "template " << t.id << '\n';
    for (const auto& block : t.blocks) {
      for (std::size_t i = 0; i < block.size(); ++i) out << (i ? " " : "") << block[i].row << ',' << block[i].col;
      out << '\n';
    }
  }
}

inline Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open codebook file '" + path.string() + "'");
  return parse_codebook(in);
}

}  // namespace mapcomm
