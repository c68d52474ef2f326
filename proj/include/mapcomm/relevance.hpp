#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mapcomm/grid_map.hpp"

namespace mapcomm {

/// Per-cell proximity to the Actor's planned path, in (0, 1].
struct WeightField {
  std::vector<double> weights;
  double sigma = 20.0;
};

namespace detail {

/// 1-D lower envelope of parabolas (Felzenszwalb & Huttenlocher); f is
/// overwritten with min_q (p - q)^2 + f(q).
inline void squared_distance_1d(std::vector<double>& f, std::vector<double>& scratch_d, std::vector<int>& v,
                                std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  scratch_d.assign(static_cast<std::size_t>(n), kInf);
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    const auto meet = [&](int p) {
      return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
    };
    double s = meet(v[k]);
    while (s <= z[k]) s = meet(v[--k]);  // z[0] = -inf stops the scan
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) return;  // no finite sites on this line
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    scratch_d[q] = dq * dq + f[v[j]];
  }
  f.swap(scratch_d);
}

}  // namespace detail

/// Exact squared Euclidean distance (cell units) from every cell to the nearest site.
inline std::vector<double> squared_distance_to(std::span<const Cell> sites, const MapDims& dims) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(dims.size(), kInf);
  for (Cell c : sites) {
    if (!dims.contains(c)) throw std::invalid_argument("squared_distance_to: site outside map");
    grid[dims.index(c)] = 0.0;
  }
  std::vector<double> line, scratch, z;
  std::vector<int> v;
  line.resize(static_cast<std::size_t>(dims.rows));
  for (int c = 0; c < dims.cols; ++c) {
    line.assign(static_cast<std::size_t>(dims.rows), kInf);
    for (int r = 0; r < dims.rows; ++r) line[r] = grid[dims.index({r, c})];
    detail::squared_distance_1d(line, scratch, v, z);
    for (int r = 0; r < dims.rows; ++r) grid[dims.index({r, c})] = line[r];
  }
  for (int r = 0; r < dims.rows; ++r) {
    line.assign(grid.begin() + static_cast<std::ptrdiff_t>(dims.index({r, 0})),
                grid.begin() + static_cast<std::ptrdiff_t>(dims.index({r, 0}) + dims.cols));
    detail::squared_distance_1d(line, scratch, v, z);
    std::copy(line.begin(), line.end(), grid.begin() + static_cast<std::ptrdiff_t>(dims.index({r, 0})));
  }
  return grid;
}

/// w(p) = max over path cells p* of exp(-|p - p*|^2 / (2 sigma^2)).
/// With `cutoff_sigmas`, cells farther than cutoff * sigma get the kernel value at the cutoff.
inline WeightField path_weights(std::span<const Cell> path, const MapDims& dims, double sigma,
                                std::optional<double> cutoff_sigmas = std::nullopt) {
  if (path.empty()) throw std::invalid_argument("path_weights: empty path");
  if (!(sigma > 0.0)) throw std::invalid_argument("path_weights: sigma must be positive");
  const auto d2 = squared_distance_to(path, dims);
  WeightField w;
  w.sigma = sigma;
  w.weights.resize(d2.size());
  const double denom = 2.0 * sigma * sigma;
  const double cap = cutoff_sigmas ? (*cutoff_sigmas * sigma) * (*cutoff_sigmas * sigma) : 0.0;
  for (std::size_t i = 0; i < d2.size(); ++i) {
    const double d = (cutoff_sigmas && d2[i] > cap) ? cap : d2[i];
    w.weights[i] = std::max(std::exp(-d / denom), std::numeric_limits<double>::min());
  }
  return w;
}

}  // namespace mapcomm
