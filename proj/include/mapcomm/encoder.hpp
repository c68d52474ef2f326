#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mapcomm/abstraction.hpp"
#include "mapcomm/estimator.hpp"
#include "mapcomm/grid_map.hpp"
#include "mapcomm/relevance.hpp"

namespace mapcomm {

/// How path weights enter the reconstruction error.
enum class WeightMode {
  kSquared,  // sum (w e)^2
  kLinear,   // sum w e^2
};

struct EncoderParams {
  double lambda_coefficient = 0.02;  // lambda(theta) = coefficient * k
  WeightMode weight_mode = WeightMode::kSquared;
  bool allow_silence = false;        // adds a "send nothing" candidate with zero cost term
};

struct SelectionResult {
  static constexpr int kSilent = 0;

  int theta = kSilent;
  double cost = 0.0;
  std::vector<std::pair<int, double>> per_template;  // (theta, J), codebook order
  Measurement message;                               // operator and noiseless o = A x

  bool silent() const { return theta == kSilent; }
  std::size_t k() const { return message.op.rows(); }
};

/// Exhaustive search over the codebook for
///   J(theta) = |W o (x~ - x^(theta))|^2 + lambda_coefficient * k(theta),
/// where x^(theta) is the projected mean after a hypothetical noiseless update
/// with template theta. The error sums over sensed cells only. Ties go to the
/// lowest template id. `belief` is not modified.
inline SelectionResult select_abstraction(const BeliefState& belief, const PartialMap& sensed, const WeightField& weights,
                                          Cell sensor_pos, const MapDims& dims, const Codebook& codebook,
                                          const EncoderParams& params, const NoiseModel& channel_noise) {
  if (codebook.templates.empty()) throw std::invalid_argument("select_abstraction: empty codebook");
  if (params.lambda_coefficient < 0.0) throw std::invalid_argument("select_abstraction: negative lambda coefficient");
  if (belief.size() != dims.size() || sensed.mask.size() != dims.size() || weights.weights.size() != dims.size())
    throw std::invalid_argument("select_abstraction: size mismatch between belief, sensed map and weights");

  const auto term = [&](std::size_t c, double estimate) {
    const double e = sensed.values[c] - estimate;
    const double w = weights.weights[c];
    return params.weight_mode == WeightMode::kSquared ? (w * e) * (w * e) : w * e * e;
  };
  const Eigen::VectorXd& current = belief.mean();
  double base = 0.0;
  for (std::size_t c : sensed.cells) base += term(c, current[static_cast<Eigen::Index>(c)]);

  std::vector<int> ids;
  for (const auto& t : codebook.templates) ids.push_back(t.id);
  std::sort(ids.begin(), ids.end());

  SelectionResult best;
  best.cost = std::numeric_limits<double>::infinity();
  if (params.allow_silence) {
    best.theta = SelectionResult::kSilent;
    best.cost = base;
    best.per_template.emplace_back(SelectionResult::kSilent, base);
  }
  for (int id : ids) {
    const AbstractionTemplate& tmpl = *codebook.find(id);
    ObservationOperator op = instantiate_operator(tmpl, dims, sensor_pos);
    Eigen::VectorXd obs = op.apply(sensed.values);
    for (const auto& row : op.row_list())
      for (std::size_t c : row.cells)
        if (!sensed.has(c)) throw std::invalid_argument("select_abstraction: template covers an unsensed cell");

    double error = base;
    if (op.rows() > 0) {
      const auto delta = belief.posterior_mean(
          op, obs, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(op.rows()), channel_noise.variance),
          channel_noise.regularization);
      for (std::size_t i = 0; i < delta.cells.size(); ++i) {
        const std::size_t c = delta.cells[i];
        if (!sensed.has(c)) continue;
        const double updated = std::clamp(delta.values[static_cast<Eigen::Index>(i)], 0.0, 1.0);
        error += term(c, updated) - term(c, current[static_cast<Eigen::Index>(c)]);
      }
    }
    const double j = std::max(error, 0.0) + params.lambda_coefficient * static_cast<double>(op.rows());
    best.per_template.emplace_back(id, j);
    if (j < best.cost) {
      best.cost = j;
      best.theta = id;
      best.message = {std::move(op), std::move(obs)};
    }
  }
  return best;
}

}  // namespace mapcomm
