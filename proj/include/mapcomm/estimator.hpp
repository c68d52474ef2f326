#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mapcomm/abstraction.hpp"
#include "mapcomm/grid_map.hpp"

namespace mapcomm {

/// Isotropic measurement noise V = variance * I. `regularization` is the
/// artificial variance added when the innovation covariance cannot be factored.
struct NoiseModel {
  double variance = 0.0;
  double regularization = 1e-8;
};

/// A linear measurement: operator rows and the values received for them.
struct Measurement {
  ObservationOperator op;
  Eigen::VectorXd values;
};

/// Gaussian map belief N(mean, cov) with a clamped copy of the mean.
///
/// Covariance is only materialized for touched cells (cells that appeared in
/// some operator row). Touched cells are grouped into blocks such that cells in
/// different blocks have exactly zero covariance; every untouched cell keeps
/// the prior mean and the scalar prior variance.
class BeliefState {
 public:
  BeliefState(Eigen::VectorXd prior_mean, double prior_variance)
      : prior_mean_(std::move(prior_mean)), prior_variance_(prior_variance) {
    if (prior_mean_.size() == 0) throw std::invalid_argument("BeliefState: empty map");
    if (!(prior_variance_ > 0.0)) throw std::invalid_argument("BeliefState: prior variance must be positive");
    raw_ = prior_mean_;
    projected_ = raw_.cwiseMax(0.0).cwiseMin(1.0);
    block_of_.assign(static_cast<std::size_t>(raw_.size()), -1);
    slot_of_.assign(static_cast<std::size_t>(raw_.size()), -1);
  }

  BeliefState(std::size_t cells, double prior_mean, double prior_variance)
      : BeliefState(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cells), prior_mean), prior_variance) {}

  std::size_t size() const { return block_of_.size(); }
  const Eigen::VectorXd& prior_mean() const { return prior_mean_; }
  double prior_variance() const { return prior_variance_; }

  /// x-hat' : the recursion state.
  const Eigen::VectorXd& mean_unprojected() const { return raw_; }
  /// x-hat = clamp(x-hat', 0, 1).
  const Eigen::VectorXd& mean() const { return projected_; }

  bool touched(std::size_t i) const { return block_of_[i] >= 0; }
  std::size_t touched_count() const { return touched_; }

  double variance(std::size_t i) const {
    const int b = block_of_[i];
    if (b < 0) return prior_variance_;
    return blocks_[b].cov(slot_of_[i], slot_of_[i]);
  }

  double covariance(std::size_t i, std::size_t j) const {
    if (i == j) return variance(i);
    const int b = block_of_[i];
    if (b < 0 || b != block_of_[j]) return 0.0;
    return blocks_[b].cov(slot_of_[i], slot_of_[j]);
  }

  /// Full N x N covariance. Intended for small maps and tests.
  Eigen::MatrixXd dense_covariance() const {
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) * prior_variance_;
    for (const auto& blk : blocks_) {
      for (std::size_t a = 0; a < blk.cells.size(); ++a)
        for (std::size_t b = 0; b < blk.cells.size(); ++b)
          m(static_cast<Eigen::Index>(blk.cells[a]), static_cast<Eigen::Index>(blk.cells[b])) =
              blk.cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    return m;
  }

  std::size_t largest_block() const {
    std::size_t m = 0;
    for (const auto& b : blocks_) m = std::max(m, b.cells.size());
    return m;
  }

  /// Unprojected posterior mean on the cells an update would change, without
  /// touching this belief. Cells outside `cells` keep their current mean.
  struct MeanDelta {
    std::vector<std::size_t> cells;
    Eigen::VectorXd values;
  };

  MeanDelta posterior_mean(const ObservationOperator& op, const Eigen::VectorXd& obs, const Eigen::VectorXd& row_variance,
                           double regularization) const {
    check(op, obs, row_variance, regularization);
    MeanDelta out;
    if (op.rows() == 0) return out;
    Frame f = frame(op, obs, row_variance, regularization);
    const Eigen::VectorXd gain_innov = f.U * f.llt.solve(f.innovation);
    out.cells = std::move(f.cells);
    out.values.resize(static_cast<Eigen::Index>(out.cells.size()));
    for (std::size_t i = 0; i < out.cells.size(); ++i)
      out.values[static_cast<Eigen::Index>(i)] = raw_[static_cast<Eigen::Index>(out.cells[i])] + gain_innov[static_cast<Eigen::Index>(i)];
    return out;
  }

  /// Kalman measurement update with per-row noise variances.
  void update(const ObservationOperator& op, const Eigen::VectorXd& obs, const Eigen::VectorXd& row_variance,
              double regularization) {
    check(op, obs, row_variance, regularization);
    if (op.rows() == 0) return;
    Frame f = frame(op, obs, row_variance, regularization);
    const auto t = static_cast<Eigen::Index>(f.cells.size());

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(t, t);
    Eigen::Index off = 0;
    for (int b : f.blocks) {
      const auto sz = blocks_[b].cov.rows();
      cov.block(off, off, sz, sz) = blocks_[b].cov;
      off += sz;
    }
    for (; off < t; ++off) cov(off, off) = prior_variance_;

    const Eigen::VectorXd gain_innov = f.U * f.llt.solve(f.innovation);
    const Eigen::MatrixXd z = f.llt.matrixL().solve(f.U.transpose());
    cov.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose(), -1.0);
    cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
    for (Eigen::Index i = 0; i < t; ++i) cov(i, i) = std::max(cov(i, i), 0.0);

    for (Eigen::Index i = 0; i < t; ++i) {
      const auto c = static_cast<Eigen::Index>(f.cells[static_cast<std::size_t>(i)]);
      raw_[c] += gain_innov[i];
      projected_[c] = std::clamp(raw_[c], 0.0, 1.0);
    }

    for (int b : f.blocks) release(b);
    split_into_blocks(f.cells, cov);
  }

  /// Re-derives x-hat from x-hat'. Idempotent.
  void project() { projected_ = raw_.cwiseMax(0.0).cwiseMin(1.0); }

 private:
  struct Block {
    std::vector<std::size_t> cells;
    Eigen::MatrixXd cov;
  };

  /// Everything the gain computation needs, in a local frame of merged cells:
  /// the touched blocks hit by the operator, then any untouched support cells.
  struct Frame {
    std::vector<int> blocks;
    std::vector<std::size_t> cells;
    Eigen::MatrixXd U;  // cov * A^T restricted to `cells`
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd innovation;
  };

  void check(const ObservationOperator& op, const Eigen::VectorXd& obs, const Eigen::VectorXd& row_variance,
             double regularization) const {
    if (op.cols() != size()) throw std::invalid_argument("kalman_update: operator width does not match belief size");
    if (static_cast<std::size_t>(obs.size()) != op.rows())
      throw std::invalid_argument("kalman_update: observation length does not match operator rows");
    if (static_cast<std::size_t>(row_variance.size()) != op.rows())
      throw std::invalid_argument("kalman_update: noise length does not match operator rows");
    if (!obs.allFinite()) throw DataError("kalman_update: non-finite observation");
    if (!(row_variance.array() >= 0.0).all()) throw std::invalid_argument("kalman_update: negative noise variance");
    if (!(regularization > 0.0)) throw std::invalid_argument("kalman_update: regularization must be positive");
  }

  Frame frame(const ObservationOperator& op, const Eigen::VectorXd& obs, const Eigen::VectorXd& row_variance,
              double regularization) const {
    Frame f;
    std::unordered_map<int, Eigen::Index> block_offset;
    std::unordered_map<std::size_t, Eigen::Index> fresh;
    std::vector<std::size_t> fresh_cells;
    Eigen::Index t = 0;
    for (const auto& row : op.row_list()) {
      for (std::size_t c : row.cells) {
        const int b = block_of_[c];
        if (b >= 0) {
          if (block_offset.emplace(b, t).second) {
            f.blocks.push_back(b);
            t += static_cast<Eigen::Index>(blocks_[b].cells.size());
          }
        } else if (fresh.emplace(c, 0).second) {
          fresh_cells.push_back(c);
        }
      }
    }
    for (int b : f.blocks) f.cells.insert(f.cells.end(), blocks_[b].cells.begin(), blocks_[b].cells.end());
    for (std::size_t c : fresh_cells) {
      fresh[c] = t++;
      f.cells.push_back(c);
    }
    auto local = [&](std::size_t c) -> Eigen::Index {
      const int b = block_of_[c];
      return b >= 0 ? block_offset.at(b) + slot_of_[c] : fresh.at(c);
    };

    const auto k = static_cast<Eigen::Index>(op.rows());
    f.U = Eigen::MatrixXd::Zero(t, k);
    f.innovation.resize(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      const auto& row = op.row(static_cast<std::size_t>(r));
      const double w = row.coefficient();
      double predicted = 0.0;
      for (std::size_t c : row.cells) {
        predicted += w * raw_[static_cast<Eigen::Index>(c)];
        const int b = block_of_[c];
        if (b >= 0) {
          const auto& blk = blocks_[b];
          f.U.col(r).segment(block_offset.at(b), blk.cov.rows()) += w * blk.cov.col(slot_of_[c]);
        } else {
          f.U(fresh.at(c), r) += w * prior_variance_;
        }
      }
      f.innovation[r] = obs[r] - predicted;
    }

    Eigen::MatrixXd s(k, k);
    for (Eigen::Index r = 0; r < k; ++r) {
      const auto& row = op.row(static_cast<std::size_t>(r));
      const double w = row.coefficient();
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(k);
      for (std::size_t c : row.cells) acc += w * f.U.row(local(c));
      s.row(r) = acc;
    }
    s = 0.5 * (s + s.transpose());
    s.diagonal() += row_variance;
    factor_innovation(s, regularization, f.llt);
    return f;
  }

  /// Cholesky of the innovation covariance; adds regularization * I (growing
  /// tenfold per retry) while the factor fails or is numerically singular.
  static void factor_innovation(Eigen::MatrixXd& s, double regularization, Eigen::LLT<Eigen::MatrixXd>& llt) {
    const double scale = std::max(s.diagonal().cwiseAbs().maxCoeff(), 0.0);
    double eps = regularization;
    for (int attempt = 0; attempt < 12; ++attempt) {
      llt.compute(s);
      if (llt.info() == Eigen::Success) {
        const double min_pivot = llt.matrixLLT().diagonal().array().square().minCoeff();
        if (min_pivot > 1e-10 * scale && min_pivot > 0.0) return;
      }
      s.diagonal().array() += eps;
      eps *= 10.0;
    }
    throw std::runtime_error("kalman_update: innovation covariance could not be regularized");
  }

  void release(int b) {
    blocks_[b].cells.clear();
    blocks_[b].cov.resize(0, 0);
    free_.push_back(b);
  }

  int acquire() {
    if (!free_.empty()) {
      const int b = free_.back();
      free_.pop_back();
      return b;
    }
    blocks_.emplace_back();
    return static_cast<int>(blocks_.size() - 1);
  }

  /// Stores `cov` over `cells` as connected components of its nonzero pattern.
  void split_into_blocks(const std::vector<std::size_t>& cells, const Eigen::MatrixXd& cov) {
    const auto t = static_cast<Eigen::Index>(cells.size());
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(t));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](Eigen::Index x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (Eigen::Index j = 0; j < t; ++j) {
      for (Eigen::Index i = j + 1; i < t; ++i) {
        if (cov(i, j) != 0.0) {
          const auto a = find(i), b = find(j);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
      }
    }
    std::unordered_map<Eigen::Index, std::vector<Eigen::Index>> groups;
    std::vector<Eigen::Index> roots;
    for (Eigen::Index i = 0; i < t; ++i) {
      const auto r = find(i);
      auto [it, inserted] = groups.try_emplace(r);
      if (inserted) roots.push_back(r);
      it->second.push_back(i);
    }
    for (auto r : roots) {
      const auto& idx = groups[r];
      const int b = acquire();
      Block& blk = blocks_[b];
      blk.cov = cov(idx, idx);
      blk.cells.resize(idx.size());
      for (std::size_t s = 0; s < idx.size(); ++s) {
        const std::size_t c = cells[static_cast<std::size_t>(idx[s])];
        blk.cells[s] = c;
        if (block_of_[c] < 0) ++touched_;
        block_of_[c] = b;
        slot_of_[c] = static_cast<int>(s);
      }
    }
  }

  Eigen::VectorXd prior_mean_;
  double prior_variance_;
  Eigen::VectorXd raw_;
  Eigen::VectorXd projected_;
  std::vector<int> block_of_;
  std::vector<int> slot_of_;
  std::vector<Block> blocks_;
  std::vector<int> free_;
  std::size_t touched_ = 0;
};

/// x' += K (o - A x'), cov = (I - K A) cov, K = cov A^T (A cov A^T + V)^-1.
inline void kalman_update(BeliefState& belief, const ObservationOperator& op, const Eigen::VectorXd& obs,
                          const NoiseModel& noise) {
  belief.update(op, obs, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(op.rows()), noise.variance),
                noise.regularization);
}

inline void kalman_update(BeliefState& belief, const ObservationOperator& op, const Eigen::VectorXd& obs,
                          const Eigen::VectorXd& row_variance, double regularization) {
  belief.update(op, obs, row_variance, regularization);
}

inline void project(BeliefState& belief) { belief.project(); }

/// Decoder step on the Actor: own window first, then the Sensor's abstraction
/// (if one arrived), then projection.
inline void actor_decode_step(BeliefState& belief, const Measurement& actor, const NoiseModel& actor_noise,
                              const Measurement* sensor, const NoiseModel& sensor_noise) {
  kalman_update(belief, actor.op, actor.values, actor_noise);
  if (sensor) kalman_update(belief, sensor->op, sensor->values, sensor_noise);
  project(belief);
}

/// A cell the Actor has measured `times` times that the Sensor has not yet mirrored.
struct OverlapObservation {
  std::size_t cell = 0;
  int times = 1;
};

/// Decoder step on the Sensor. Actor measurements of cells the Sensor has
/// sensed are replayed with the Sensor's true values and the Actor's noise
/// (`times` repeats fold into variance / times); then the Sensor's own
/// abstraction is applied; then projection.
inline void sensor_decode_step(BeliefState& belief, const PartialMap& sensed, std::span<const OverlapObservation> overlap,
                               const NoiseModel& actor_noise, const Measurement* own, const NoiseModel& channel_noise) {
  if (!overlap.empty()) {
    std::vector<AveragingRow> rows;
    Eigen::VectorXd values(static_cast<Eigen::Index>(overlap.size()));
    Eigen::VectorXd variances(static_cast<Eigen::Index>(overlap.size()));
    for (std::size_t i = 0; i < overlap.size(); ++i) {
      const auto& o = overlap[i];
      if (o.cell >= sensed.mask.size() || !sensed.has(o.cell))
        throw std::invalid_argument("sensor_decode_step: overlap cell was never sensed");
      if (o.times < 1) throw std::invalid_argument("sensor_decode_step: overlap count must be positive");
      rows.push_back({{o.cell}});
      values[static_cast<Eigen::Index>(i)] = sensed.values[o.cell];
      variances[static_cast<Eigen::Index>(i)] = actor_noise.variance / o.times;
    }
    ObservationOperator op(belief.size(), std::move(rows));
    kalman_update(belief, op, values, variances, actor_noise.regularization);
  }
  if (own) kalman_update(belief, own->op, own->values, channel_noise);
  project(belief);
}

}  // namespace mapcomm
