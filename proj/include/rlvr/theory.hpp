#pragma once

// Convergence-time bounds for the beta = 0 flows and a verifier that checks
// the monotonicity and bound invariants on recorded trajectories.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlvr/digest.hpp"
#include "rlvr/error.hpp"
#include "rlvr/flow.hpp"
#include "rlvr/model.hpp"
#include "rlvr/objectives.hpp"

namespace rlvr {

/// sum_{r != r'} pi_ref(r) / pi_ref(r*). At least 1 since r* is in the sum.
inline double gamma_ref(const PatternTask& task, std::span<const double> ref_probs) {
  require_distribution(ref_probs, task.size(), "reference distribution");
  const std::size_t star = task.best();
  const std::size_t second = task.require_runner_up();
  for (double p : ref_probs) require(p > 0.0, ErrorCode::invalid_input, "reference distribution must have full support");
  double num = 0.0;
  for (std::size_t i = 0; i < ref_probs.size(); ++i)
    if (i != second) num += ref_probs[i];
  return num / ref_probs[star];
}

struct T0Bound {
  double log10 = 0.0;
  /// Empty when T0 exceeds the double range.
  std::optional<double> value;
  double gamma = 0.0;
  double delta = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double prefactor = 0.0;
};

/// T0 = (C1 gamma)^(2 C2 gamma) - 1 scaled by 1 / (2 - 2 pi_ref(r')), with
/// C2 = 1/Delta and C1 = p_succ(r')/Delta. Evaluated in log space.
inline T0Bound bound_T0(const PatternTask& task, std::span<const double> ref_probs) {
  const auto cls = classify_regime(task, ref_probs);
  require(cls.regime == Regime::regime2, ErrorCode::wrong_regime,
          std::string("T0 is defined for Regime2 initializations, got ") + to_string(cls.regime));
  const std::size_t second = task.require_runner_up();
  T0Bound b;
  b.gamma = gamma_ref(task, ref_probs);
  b.delta = task.gap();
  b.c2 = 1.0 / b.delta;
  b.c1 = task.success_rate(second) / b.delta;
  b.prefactor = 1.0 / (2.0 - 2.0 * ref_probs[second]);
  const double base = b.c1 * b.gamma;
  require(base > 1.0, ErrorCode::degenerate_bound, "C1 * gamma <= 1, the T0 bound is vacuous");
  const double exponent = 2.0 * b.c2 * b.gamma * std::log(base);
  // log(e^x - 1) = x + log1p(-e^-x)
  const double log_power_minus_one = exponent < 1.0 ? std::log(std::expm1(exponent))
                                                    : exponent + std::log1p(-std::exp(-exponent));
  b.log10 = std::log10(b.prefactor) + log_power_minus_one / std::numbers::ln10;
  if (b.log10 < std::log10(std::numeric_limits<double>::max())) {
    const double v = b.prefactor * std::expm1(exponent);
    if (std::isfinite(v)) b.value = v;
  }
  return b;
}

struct T1Bound {
  double value = 0.0;
  /// 1 - pi_ref(r*) <= epsilon already at t = 0.
  bool already_satisfied = false;
};

/// Regime-1 time after which 1 - pi(r*) < epsilon:
/// (1/C)(1/epsilon - 1/(1 - pi0(r*))) with C = Delta * pi0(r*)^2.
inline T1Bound bound_T1(const PatternTask& task, std::span<const double> ref_probs, double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, ErrorCode::invalid_input, "epsilon must lie in (0,1)");
  const auto cls = classify_regime(task, ref_probs);
  require(cls.regime == Regime::regime1, ErrorCode::wrong_regime,
          std::string("T1 is defined for Regime1 initializations, got ") + to_string(cls.regime));
  const double pi0 = ref_probs[task.best()];
  if (epsilon >= 1.0 - pi0) return {0.0, true};
  // Largest non-optimal success rate; r' may be tied here.
  double second_rate = 0.0;
  for (std::size_t i = 0; i < task.size(); ++i)
    if (i != task.best()) second_rate = std::max(second_rate, task.success_rate(i));
  const double c = (task.success_rate(task.best()) - second_rate) * pi0 * pi0;
  return {(1.0 / c) * (1.0 / epsilon - 1.0 / (1.0 - pi0)), false};
}

/// SFT time (L(theta(0)) - inf L) / epsilon^2 with inf L = H(p_sft).
inline double bound_T1_sft(std::span<const double> p_sft, const PolicyState& init, double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, ErrorCode::invalid_input, "epsilon must lie in (0,1)");
  require_distribution(p_sft, init.size(), "p_sft");
  for (double p : p_sft) require(p > 0.0, ErrorCode::invalid_input, "p_sft must have full support");
  const double excess = sft_loss(p_sft, init) - entropy(p_sft);
  return std::max(0.0, excess) / (epsilon * epsilon);
}

struct InvariantCheck {
  std::string name;
  bool passed = true;
  double worst_violation = 0.0;
};

struct RegimeReport {
  Regime regime = Regime::neither;
  bool boundary_equality = false;
  double acc_ref = 0.0;
  double epsilon = 0.05;
  std::optional<double> gamma;
  std::optional<T0Bound> t0;
  std::optional<T1Bound> t1;
  std::optional<double> t1_sft;
  std::vector<InvariantCheck> checks;
  std::vector<std::string> notes;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const InvariantCheck& c) { return c.passed; });
  }
  const InvariantCheck* find(std::string_view name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

struct VerifyOptions {
  double epsilon = 0.05;
  double monotone_slack = 1e-9;
  double runner_up_bound_slack = 1e-6;
  double t0_slack = 1e-9;
  double consistency_tolerance = 1e-12;
};

namespace detail {

/// Largest drop x[k] - x[k+1] of a sequence that should be non-decreasing.
template <class F>
double worst_decrease(const std::vector<Sample>& xs, F&& f) {
  double worst = 0.0;
  for (std::size_t k = 1; k < xs.size(); ++k) worst = std::max(worst, f(xs[k - 1]) - f(xs[k]));
  return worst;
}

inline InvariantCheck bounded_check(std::string name, double worst, double slack) {
  return {std::move(name), worst <= slack, worst};
}

}  // namespace detail

/// Bound values and invariant verdicts for a trajectory of `scenario`.
inline RegimeReport verify_trajectory(const Scenario& scenario, const Trajectory& traj,
                                      const VerifyOptions& opt = {}) {
  require(traj.scenario_digest == scenario_digest(scenario), ErrorCode::provenance,
          "trajectory digest " + digest_hex(traj.scenario_digest) + " does not match scenario digest " +
              digest_hex(scenario_digest(scenario)));
  require(traj.pattern_count == scenario.task.size(), ErrorCode::provenance, "trajectory width does not match task");
  require(!traj.samples.empty(), ErrorCode::invalid_input, "empty trajectory");

  const auto& task = scenario.task;
  const auto& xs = traj.samples;
  const auto ref = scenario.ref.probs();
  const bool strict = task.has_unique_best();
  const std::size_t star = strict ? task.best() : 0;

  RegimeReport rep;
  rep.epsilon = opt.epsilon;
  if (strict) {
    const auto cls = classify_regime(task, ref);
    rep.regime = cls.regime;
    rep.boundary_equality = cls.boundary_equality;
    rep.acc_ref = cls.acc_ref;
    if (task.runner_up()) rep.gamma = gamma_ref(task, ref);
  } else {
    rep.acc_ref = accuracy(task, ref);
    rep.notes.push_back("no strict optimum: regime classification skipped");
  }

  {
    double time_violation = xs.front().t == 0.0 ? 0.0 : std::abs(xs.front().t);
    double simplex = 0.0, acc_err = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (k > 0 && !(xs[k].t > xs[k - 1].t)) time_violation = std::max(time_violation, xs[k - 1].t - xs[k].t + 1.0);
      double sum = 0.0;
      for (double p : xs[k].probs) sum += p;
      simplex = std::max(simplex, std::abs(sum - 1.0));
      acc_err = std::max(acc_err, std::abs(xs[k].acc - accuracy(task, xs[k].probs)));
    }
    rep.checks.push_back({"time_strictly_increasing_from_zero", time_violation == 0.0, time_violation});
    rep.checks.push_back(detail::bounded_check("probabilities_on_simplex", simplex, kSimplexTolerance));
    rep.checks.push_back(detail::bounded_check("acc_matches_probs", acc_err, opt.consistency_tolerance));
  }

  // A converged trajectory stays at its last state, so later times are covered too.
  auto covered = [&](double t) { return t <= traj.end_time || traj.converged; };

  const bool beta_zero_rlvr = scenario.mode == Mode::rlvr_flow && scenario.beta == 0.0;

  if (scenario.mode == Mode::rlvr_flow && !beta_zero_rlvr)
    rep.notes.push_back("beta > 0: convergence-time bounds do not apply");

  if (beta_zero_rlvr) {
    rep.checks.push_back(detail::bounded_check(
        "acc_monotone", detail::worst_decrease(xs, [](const Sample& s) { return s.acc; }), opt.monotone_slack));
    double dacc_err = 0.0;
    for (const auto& s : xs) dacc_err = std::max(dacc_err, std::abs(s.dacc - acc_derivative(task, s.probs)));
    rep.checks.push_back(detail::bounded_check("dacc_matches_closed_form", dacc_err, opt.consistency_tolerance));

    if (rep.regime == Regime::regime1) {
      rep.checks.push_back(detail::bounded_check(
          "pi_star_monotone", detail::worst_decrease(xs, [&](const Sample& s) { return s.probs[star]; }),
          opt.monotone_slack));
      rep.t1 = bound_T1(task, ref, opt.epsilon);
      if (rep.t1->already_satisfied) {
        rep.notes.push_back("1 - pi_ref(r*) <= epsilon at t = 0");
      } else if (covered(rep.t1->value)) {
        const double at = interpolate_at(traj, rep.t1->value, [&](const Sample& s) { return s.probs[star]; });
        const double violation = std::max(0.0, (1.0 - opt.epsilon) - at);
        rep.checks.push_back({"pi_star_above_1_minus_eps_at_T1", at > 1.0 - opt.epsilon, violation});
      } else {
        rep.notes.push_back("T1 lies beyond the recorded horizon");
      }
    } else if (rep.regime == Regime::regime2) {
      const std::size_t second = task.require_runner_up();
      const double c = 1.0 / (1.0 - ref[second]);
      double worst_bound = 0.0;
      for (const auto& s : xs) {
        const double bound = 1.0 - 1.0 / (2.0 * s.t + c);
        worst_bound = std::max(worst_bound, s.probs[second] - bound);
      }
      rep.checks.push_back(detail::bounded_check("pi_runner_up_upper_bound", worst_bound, opt.runner_up_bound_slack));
      double worst_rho = 0.0;
      for (std::size_t i = 0; i < task.size(); ++i) {
        if (i == star || i == second) continue;
        // rho should be non-increasing, so its negation should not decrease.
        worst_rho = std::max(worst_rho, detail::worst_decrease(xs, [&](const Sample& s) {
          return -s.probs[i] / s.probs[star];
        }));
      }
      rep.checks.push_back(detail::bounded_check("rho_monotone", worst_rho, opt.monotone_slack));
      try {
        rep.t0 = bound_T0(task, ref);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::degenerate_bound) throw;
        rep.notes.push_back("C1 * gamma <= 1: no T0 bound");
      }
      if (rep.t0 && rep.t0->value && covered(*rep.t0->value)) {
        double worst = 0.0;
        for (const auto& s : xs) {
          if (s.t < *rep.t0->value) continue;
          for (std::size_t i = 0; i < task.size(); ++i)
            if (i != star) worst = std::max(worst, task.success_rate(i) - s.acc);
        }
        // Crossing at T0 itself is checked by interpolation.
        const double at = interpolate_at(traj, *rep.t0->value, [](const Sample& s) { return s.acc; });
        worst = std::max(worst, task.success_rate(second) - at);
        rep.checks.push_back({"acc_above_suboptimal_after_T0", worst < opt.t0_slack, std::max(0.0, worst)});
      } else if (rep.t0) {
        rep.notes.push_back("T0 lies beyond the recorded horizon");
      }
    } else if (strict) {
      rep.notes.push_back("initialization is in neither regime: only accuracy monotonicity applies");
    }
  }

  if (scenario.mode == Mode::sft_flow) {
    const auto& p_sft = *scenario.p_sft;
    auto loss = [&](const Sample& s) {
      double l = 0.0;
      for (std::size_t i = 0; i < p_sft.size(); ++i)
        if (p_sft[i] > 0.0) l -= p_sft[i] * std::log(s.probs[i]);
      return l;
    };
    rep.checks.push_back(detail::bounded_check(
        "sft_loss_monotone", detail::worst_decrease(xs, [&](const Sample& s) { return -loss(s); }),
        opt.monotone_slack));
    rep.checks.push_back(detail::bounded_check(
        "sup_gap_monotone", detail::worst_decrease(xs, [&](const Sample& s) { return -sup_gap(p_sft, s.probs); }),
        opt.monotone_slack));
    const bool full_support = std::all_of(p_sft.begin(), p_sft.end(), [](double p) { return p > 0.0; });
    if (full_support) {
      rep.t1_sft = bound_T1_sft(p_sft, scenario.ref, opt.epsilon);
      if (covered(*rep.t1_sft)) {
        const double gap = interpolate_at(traj, *rep.t1_sft, [&](const Sample& s) { return sup_gap(p_sft, s.probs); });
        rep.checks.push_back({"sup_gap_below_eps_at_T1_sft", gap < opt.epsilon, std::max(0.0, gap - opt.epsilon)});
      } else {
        rep.notes.push_back("T1' lies beyond the recorded horizon");
      }
    } else {
      rep.notes.push_back("p_sft lacks full support: no T1' bound");
    }
  }

  return rep;
}

}  // namespace rlvr
