#pragma once

#include "tube/error.hpp"
#include "tube/glm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace tube {

struct EmTrace {
  /// Objective of every accepted state, starting with the initial value.
  std::vector<double> objective_per_iteration;
  /// Number of E+M updates performed.
  int iterations = 0;
  bool converged = false;
  /// Extrapolation cycles whose result was kept (zero for plain EM).
  int accepted_extrapolations = 0;
  /// Updates that lowered the objective by more than the slack.
  int ascent_violations = 0;
};

/// Blocks held fixed at their initial value (frozen-coordinate mode).
struct FrozenBlocks {
  bool xi = false;
  bool zeta = false;
  bool lambda = false;
  bool mu = false;
};

enum class EmAcceleration { none, squarem };

struct EmConfig {
  double relative_tolerance = 1e-6;
  /// Cap on E+M updates.
  int max_iterations = 500;
  /// Allowed relative decrease of the objective across one E+M update.
  double ascent_slack = 1e-8;
  /// Throw InternalConsistencyError on an ascent violation instead of
  /// counting it. The Stage I mu update is a moment step that can lower the
  /// composite likelihood, so strict mode is only safe with mu frozen.
  bool strict_ascent = false;
  /// squarem: after two plain updates, take an extrapolated step and run one
  /// more update from it. The result is kept if it does not lower the
  /// objective or, when the preceding plain update itself went downhill, if
  /// its fixed-point residual is no larger than that of the plain step.
  /// Fixed points are those of plain EM.
  EmAcceleration acceleration = EmAcceleration::squarem;
  LogisticOptions glm;
  FrozenBlocks frozen;
};

enum class EmStage { one = 1, two = 2 };

/// Ascent violations observed by EM runs of `stage` in this process.
long em_ascent_violations(EmStage stage);
/// Both stages.
long em_ascent_violations();
void record_ascent_violation(EmStage stage);

namespace detail {

/// Softmax of `logs`, then every entry clipped to [lo, hi] and the vector
/// renormalized. Maps the unconstrained coordinates used for extrapolation
/// back onto the simplex.
inline Eigen::VectorXd simplex_from_logs(const Eigen::VectorXd& logs, double lo,
                                         double hi) {
  Eigen::ArrayXd v = (logs.array() - logs.maxCoeff()).exp();
  v /= v.sum();
  v = v.cwiseMax(lo).cwiseMin(hi);
  return (v / v.sum()).matrix();
}

/// State must expose a `double objective` member. `update` is one E+M step,
/// `pack` maps a state to an unconstrained vector and `unpack` maps back
/// (recomputing the objective).
template <class State, class Update, class Pack, class Unpack>
EmTrace run_em_loop(State& state, Update&& update, Pack&& pack,
                    Unpack&& unpack, const EmConfig& config, EmStage stage) {
  EmTrace trace;
  trace.objective_per_iteration.push_back(state.objective);
  const bool accelerate = config.acceleration == EmAcceleration::squarem;
  const std::string label = stage == EmStage::one ? "stage I" : "stage II";

  enum class Outcome { moved, converged };
  auto accept = [&](State next) {
    const double before = state.objective;
    if (next.objective < before - config.ascent_slack * std::abs(before)) {
      ++trace.ascent_violations;
      record_ascent_violation(stage);
      if (config.strict_ascent) {
        throw InternalConsistencyError(label + " EM decreased its objective at update " +
                                       std::to_string(trace.iterations));
      }
    }
    state = std::move(next);
    trace.objective_per_iteration.push_back(state.objective);
    const double change =
        std::abs(state.objective - before) / std::max(std::abs(before), 1e-300);
    return change < config.relative_tolerance ? Outcome::converged : Outcome::moved;
  };
  auto plain_step = [&]() {
    ++trace.iterations;
    return accept(update(state));
  };

  double step_max = 4.0;
  while (trace.iterations < config.max_iterations) {
    const Eigen::VectorXd x0 = pack(state);
    Outcome out = plain_step();
    if (out == Outcome::converged) {
      trace.converged = true;
      break;
    }
    if (!accelerate) continue;
    if (trace.iterations >= config.max_iterations) break;
    const Eigen::VectorXd x1 = pack(state);
    const double before_second = state.objective;
    out = plain_step();
    if (out == Outcome::converged) {
      trace.converged = true;
      break;
    }
    if (trace.iterations >= config.max_iterations) break;
    // A plain update that lowers the objective means the map is not acting
    // as an ascent map here (the mu moment step); the fixed-point residual
    // then replaces the objective as the test for keeping an extrapolation.
    const bool descending = state.objective < before_second;
    const Eigen::VectorXd x2 = pack(state);
    const Eigen::VectorXd r = x1 - x0;
    const Eigen::VectorXd v = (x2 - x1) - r;
    const double vn = v.norm();
    if (!(vn > 0.0)) continue;
    const double raw = -r.norm() / vn;
    if (raw >= -1.0) continue;  // extrapolation reduces to the plain update
    const double alpha = std::max(raw, -step_max);
    const Eigen::VectorXd xe = x0 - 2.0 * alpha * r + alpha * alpha * v;
    bool kept = false;
    try {
      if (xe.allFinite()) {
        State extrapolated = unpack(xe, state);
        const Eigen::VectorXd xe_packed = pack(extrapolated);
        ++trace.iterations;
        State next = update(extrapolated);
        const bool ascends = next.objective >= state.objective;
        const bool closer =
            descending && (pack(next) - xe_packed).norm() <= (x2 - x1).norm();
        if (std::isfinite(next.objective) && (ascends || closer)) {
          kept = true;
          ++trace.accepted_extrapolations;
          if (alpha == -step_max) step_max *= 4.0;
          if (accept(std::move(next)) == Outcome::converged) {
            trace.converged = true;
            break;
          }
        }
      }
    } catch (const InternalConsistencyError&) {
      throw;
    } catch (const Error&) {
      // A failed fit from an extrapolated point falls back to the plain path.
    }
    if (!kept) step_max = std::max(4.0, step_max / 4.0);
  }
  return trace;
}

}  // namespace detail

}  // namespace tube
