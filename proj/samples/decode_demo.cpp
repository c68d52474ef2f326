// Small walkthrough of the library: a Sensor abstraction, the Actor's
// iterative decoder, the stacked-history QP, and the resulting plan.

#include <cstdio>

#include "mapcomm/abstraction.hpp"
#include "mapcomm/estimator.hpp"
#include "mapcomm/grid_map.hpp"
#include "mapcomm/oracle_qp.hpp"
#include "mapcomm/planner.hpp"

using namespace mapcomm;

int main() {
  const GridMap truth = smooth_obstacle_map(32, 32, 3);
  const Codebook codebook = builtin_codebook_16();
  const Cell sensor{16, 16};

  BeliefState belief(truth.size(), 0.5, 1.0);
  HistoryStack history(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(truth.size()), 0.5));

  for (int id : {6, 3, 2}) {
    const ObservationOperator op = instantiate_operator(*codebook.find(id), truth.dims(), sensor);
    const Eigen::VectorXd obs = op.apply(truth.values());
    kalman_update(belief, op, obs, NoiseModel{});
    history.push(op, obs);
    std::printf("template %2d: k=%3zu bits=%4lld touched=%zu\n", id, op.rows(),
                static_cast<long long>(bits_for(op, codebook)), belief.touched_count());
  }

  const QpResult qp = solve_history_qp(history);
  std::printf("max |kalman - qp| = %.3g (qp converged: %s)\n", (belief.mean() - qp.x).cwiseAbs().maxCoeff(),
              qp.converged ? "yes" : "no");

  const PlannerParams params{0.025, 0.501, truth.size()};
  const Path path = plan(std::span<const double>(belief.mean().data(), truth.size()), truth.dims(), {2, 2}, {29, 29}, params);
  std::printf("planned %zu cells, estimated cost %.3f\n", path.cells.size(), path.cost);
}
