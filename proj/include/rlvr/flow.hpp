#pragma once

// Gradient flow d(theta)/dt = grad phi(theta) on the pattern logits,
// integrated with classical RK4 and step-doubling error control.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlvr/digest.hpp"
#include "rlvr/error.hpp"
#include "rlvr/model.hpp"
#include "rlvr/objectives.hpp"

namespace rlvr {

struct Sample {
  double t = 0.0;
  std::vector<double> probs;
  double acc = 0.0;
  double dacc = 0.0;
};

struct Trajectory {
  Mode mode = Mode::rlvr_flow;
  std::size_t pattern_count = 0;
  std::uint64_t scenario_digest = 0;
  std::vector<Sample> samples;
  /// ||rhs||_inf fell below the convergence tolerance before the horizon.
  bool converged = false;
  /// Integration ended on the caller's stop event.
  bool stopped_on_event = false;
  double end_time = 0.0;
  std::uint64_t accepted_steps = 0;
  std::uint64_t substeps = 0;
};

/// Thrown when the state becomes non-finite or the step floor is hit.
class IntegrationDiverged : public Error {
 public:
  IntegrationDiverged(const std::string& what, Sample last_valid)
      : Error(ErrorCode::integration_diverged, what), last_valid_(std::move(last_valid)) {}
  const Sample& last_valid() const noexcept { return last_valid_; }

 private:
  Sample last_valid_;
};

/// Logit velocity for the scenario's flow.
inline GradientVector flow_rhs(const Scenario& scenario, const PolicyState& state) {
  switch (scenario.mode) {
    case Mode::rlvr_flow: return rlvr_grad(scenario.task, state, scenario.ref, scenario.beta);
    case Mode::sft_flow:
      require(scenario.p_sft.has_value(), ErrorCode::validation, "sft_flow scenario requires p_sft");
      return sft_flow_direction(*scenario.p_sft, state);
    case Mode::sampled: break;
  }
  fail(ErrorCode::wrong_mode, "flow_rhs is defined for rlvr_flow and sft_flow only");
}

/// d(pi)/dt induced by a logit velocity through the softmax Jacobian.
inline std::vector<double> policy_velocity(std::span<const double> probs, std::span<const double> logit_velocity) {
  require(probs.size() == logit_velocity.size(), ErrorCode::invalid_input, "policy_velocity: dimension mismatch");
  double mean = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) mean += probs[i] * logit_velocity[i];
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (logit_velocity[i] - mean);
  return out;
}

/// dAcc/dt along a logit velocity.
inline double accuracy_rate(const PatternTask& task, std::span<const double> probs,
                            std::span<const double> logit_velocity) {
  const auto dpi = policy_velocity(probs, logit_velocity);
  return accuracy(task, dpi);
}

/// beta = 0 accuracy derivative: sum_i pi_i^2 (p_i - Acc)^2.
inline double acc_derivative(const PatternTask& task, std::span<const double> probs) {
  const double acc = accuracy(task, probs);
  double d = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double e = probs[i] * (task.success_rate(i) - acc);
    d += e * e;
  }
  return d;
}

struct StopEvent {
  std::size_t pattern = 0;
  double threshold = 1.0;
};

struct IntegrateOptions {
  double local_tolerance = 1e-9;
  double min_step = 1e-8;
  /// Early exit with `converged` once ||rhs||_inf drops below this.
  double rhs_tolerance = 1e-12;
  /// Stop after the first accepted step where pi[pattern] > threshold.
  std::optional<StopEvent> stop;
  /// Start here instead of theta_ref; the KL reference is unchanged.
  std::optional<PolicyState> initial;
};

namespace detail {

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline Sample make_sample(const Scenario& s, double t, const PolicyState& state, std::span<const double> velocity) {
  Sample out;
  out.t = t;
  out.probs.assign(state.probs().begin(), state.probs().end());
  out.acc = accuracy(s.task, out.probs);
  out.dacc = accuracy_rate(s.task, out.probs, velocity);
  return out;
}

class FlowStepper {
 public:
  FlowStepper(const Scenario& s, const IntegrateOptions& opt) : scenario_(s), opt_(opt) {}

  std::uint64_t substeps() const noexcept { return substeps_; }

  /// Advances `logits` by dt, subdividing until the local error estimate
  /// is under tolerance. Returns false if any stage turns non-finite.
  bool advance(std::vector<double>& logits, double dt) {
    std::vector<double> full, half, twice;
    if (!rk4(logits, dt, full) || !rk4(logits, 0.5 * dt, half) || !rk4(half, 0.5 * dt, twice)) return false;
    double err = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) err = std::max(err, std::abs(twice[i] - full[i]));
    err /= 15.0;
    if (err <= opt_.local_tolerance) {
      logits = centered(twice);
      substeps_ += 2;
      return true;
    }
    if (0.5 * dt < opt_.min_step)
      throw Error(ErrorCode::integration_diverged, "step size fell below the floor " + format_double(opt_.min_step));
    return advance(logits, 0.5 * dt) && advance(logits, 0.5 * dt);
  }

 private:
  bool velocity(std::span<const double> logits, std::vector<double>& out) const {
    if (!all_finite(logits)) return false;
    out = flow_rhs(scenario_, PolicyState::from_logits(logits)).entries;
    return all_finite(out);
  }

  bool rk4(std::span<const double> y, double h, std::vector<double>& out) const {
    const std::size_t k = y.size();
    std::vector<double> k1, k2, k3, k4, tmp(k);
    if (!velocity(y, k1)) return false;
    for (std::size_t i = 0; i < k; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    if (!velocity(tmp, k2)) return false;
    for (std::size_t i = 0; i < k; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    if (!velocity(tmp, k3)) return false;
    for (std::size_t i = 0; i < k; ++i) tmp[i] = y[i] + h * k3[i];
    if (!velocity(tmp, k4)) return false;
    out.resize(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return all_finite(out);
  }

  const Scenario& scenario_;
  const IntegrateOptions& opt_;
  std::uint64_t substeps_ = 0;
};

}  // namespace detail

/// Integrates the scenario's flow from theta_ref over [0, horizon].
/// Accepted steps land on the grid t = n * step (the last one is clipped to
/// the horizon); a sample is recorded every record_stride accepted steps,
/// at t = 0, and at the final time.
inline Trajectory integrate(const Scenario& scenario, const IntegrateOptions& options = {}) {
  validate(scenario);
  require(scenario.mode != Mode::sampled, ErrorCode::wrong_mode, "integrate needs rlvr_flow or sft_flow");
  if (options.stop) require(options.stop->pattern < scenario.task.size(), ErrorCode::invalid_input, "stop pattern out of range");
  if (options.initial)
    require(options.initial->size() == scenario.task.size(), ErrorCode::invalid_input, "initial state length mismatch");

  Trajectory traj;
  traj.mode = scenario.mode;
  traj.pattern_count = scenario.task.size();
  traj.scenario_digest = scenario_digest(scenario);

  PolicyState state = options.initial ? *options.initial : scenario.ref;
  std::vector<double> logits(state.logits().begin(), state.logits().end());
  auto velocity = flow_rhs(scenario, state);
  traj.samples.push_back(detail::make_sample(scenario, 0.0, state, velocity));

  detail::FlowStepper stepper(scenario, options);
  const double horizon = scenario.horizon;
  double t = 0.0;
  std::uint64_t n = 0;
  auto stop_hit = [&] {
    return options.stop && state.prob(options.stop->pattern) > options.stop->threshold;
  };

  if (velocity.max_abs() < options.rhs_tolerance) traj.converged = true;
  if (stop_hit()) traj.stopped_on_event = true;

  while (!traj.converged && !traj.stopped_on_event && t < horizon) {
    const double next_t = std::min(horizon, static_cast<double>(n + 1) * scenario.step);
    const double dt = next_t - t;
    bool ok = false;
    try {
      ok = stepper.advance(logits, dt) && detail::all_finite(logits);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::integration_diverged) throw;
      throw IntegrationDiverged(e.what(), detail::make_sample(scenario, t, state, velocity));
    }
    if (!ok) throw IntegrationDiverged("non-finite state at t=" + format_double(t), detail::make_sample(scenario, t, state, velocity));
    ++n;
    t = next_t;
    state = PolicyState::from_logits(logits);
    velocity = flow_rhs(scenario, state);
    if (!detail::all_finite(velocity.entries))
      throw IntegrationDiverged("non-finite velocity at t=" + format_double(t), detail::make_sample(scenario, t, state, velocity));
    if (velocity.max_abs() < options.rhs_tolerance) traj.converged = true;
    if (stop_hit()) traj.stopped_on_event = true;
    const bool record = (n % scenario.record_stride == 0) || t >= horizon || traj.converged || traj.stopped_on_event;
    if (record) traj.samples.push_back(detail::make_sample(scenario, t, state, velocity));
  }
  traj.accepted_steps = n;
  traj.substeps = stepper.substeps();
  traj.end_time = t;
  return traj;
}

enum class CrossingKind { acc_above, pattern_prob_above };

/// Earliest time the monitored quantity strictly exceeds `threshold`,
/// linearly interpolated between the bracketing samples.
inline std::optional<double> first_crossing(const Trajectory& traj, CrossingKind kind,
                                            std::optional<std::size_t> index, double threshold) {
  require(!traj.samples.empty(), ErrorCode::invalid_input, "first_crossing on an empty trajectory");
  if (kind == CrossingKind::pattern_prob_above)
    require(index.has_value() && *index < traj.pattern_count, ErrorCode::invalid_input,
            "first_crossing: pattern index out of range");
  auto value = [&](const Sample& s) { return kind == CrossingKind::acc_above ? s.acc : s.probs[*index]; };
  const auto& xs = traj.samples;
  if (value(xs.front()) > threshold) return xs.front().t;
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const double hi = value(xs[k]);
    if (hi <= threshold) continue;
    const double lo = value(xs[k - 1]);
    const double frac = (threshold - lo) / (hi - lo);
    return xs[k - 1].t + frac * (xs[k].t - xs[k - 1].t);
  }
  return std::nullopt;
}

/// Linear interpolation of a per-sample quantity at time t (clamped to the
/// recorded range).
template <class Quantity>
double interpolate_at(const Trajectory& traj, double t, Quantity&& quantity) {
  require(!traj.samples.empty(), ErrorCode::invalid_input, "interpolate_at on an empty trajectory");
  const auto& xs = traj.samples;
  if (t <= xs.front().t) return quantity(xs.front());
  if (t >= xs.back().t) return quantity(xs.back());
  auto it = std::upper_bound(xs.begin(), xs.end(), t, [](double v, const Sample& s) { return v < s.t; });
  const Sample& b = *it;
  const Sample& a = *(it - 1);
  const double frac = (t - a.t) / (b.t - a.t);
  return quantity(a) + frac * (quantity(b) - quantity(a));
}

}  // namespace rlvr
