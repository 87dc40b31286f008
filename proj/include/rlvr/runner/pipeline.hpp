#pragma once

// SFT-then-RLVR against pure RLVR from the same reference policy.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "rlvr/error.hpp"
#include "rlvr/flow.hpp"
#include "rlvr/model.hpp"
#include "rlvr/objectives.hpp"
#include "rlvr/runner/report_json.hpp"
#include "rlvr/theory.hpp"

namespace rlvr::runner {

struct PipelineOptions {
  double target = 0.9;
  /// Horizon of each RLVR branch; runs that never reach the target are censored here.
  double rlvr_cap = 1e6;
};

struct PipelineRecord {
  double epsilon = 0.0;
  double target = 0.9;
  double t1_sft = 0.0;

  std::vector<double> post_sft_probs;
  double post_sft_accuracy = 0.0;
  double predicted_accuracy = 0.0;  // sum p_sft * p_succ
  double accuracy_tolerance = 0.0;  // epsilon * max p_succ
  bool accuracy_within_tolerance = false;
  double post_sft_sup_gap = 0.0;
  Regime post_sft_regime = Regime::neither;
  bool post_sft_regime1 = false;

  std::optional<double> sft_target_time;  // pi(r*) crossed the target during SFT
  std::optional<double> rlvr_after_sft_time;
  std::optional<double> pipeline_time;
  bool pipeline_censored = false;

  std::optional<double> pure_time;
  bool pure_censored = false;
  double cap = 0.0;
  bool pipeline_faster = false;

  // Bound side of the comparison.
  std::optional<double> t1_after_sft;
  std::optional<double> pure_t0_log10;

  // SFT stopped when the sup gap first drops below epsilon.
  std::optional<double> sft_time_to_eps;
  std::optional<double> early_stop_pipeline_time;
};

namespace detail {

inline std::optional<double> first_time_gap_below(const Trajectory& traj, std::span<const double> p, double eps) {
  const auto& xs = traj.samples;
  double prev = sup_gap(p, xs.front().probs);
  if (prev < eps) return xs.front().t;
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const double g = sup_gap(p, xs[k].probs);
    if (g < eps) return xs[k - 1].t + (prev - eps) / (prev - g) * (xs[k].t - xs[k - 1].t);
    prev = g;
  }
  return std::nullopt;
}

inline std::optional<double> time_to_target(const Scenario& rlvr, const PolicyState& start, double target,
                                            double cap) {
  Scenario s = rlvr;
  s.horizon = cap;
  IntegrateOptions opt;
  opt.stop = StopEvent{s.task.best(), target};
  opt.initial = start;
  const auto traj = integrate(s, opt);
  return first_crossing(traj, CrossingKind::pattern_prob_above, s.task.best(), target);
}

}  // namespace detail

inline PipelineRecord run_pipeline(const Scenario& scenario, std::span<const double> p_sft, double epsilon,
                                   const PipelineOptions& options = {}) {
  validate(scenario);
  require(scenario.mode == Mode::rlvr_flow, ErrorCode::wrong_mode, "pipeline needs an rlvr_flow scenario");
  require_distribution(p_sft, scenario.task.size(), "p_sft");
  for (double p : p_sft) require(p > 0.0, ErrorCode::invalid_input, "p_sft must have full support");
  require(epsilon > 0.0 && epsilon < 1.0, ErrorCode::invalid_input, "epsilon must lie in (0,1)");

  const auto& task = scenario.task;
  const std::size_t star = task.best();
  PipelineRecord rec;
  rec.epsilon = epsilon;
  rec.target = options.target;
  rec.cap = options.rlvr_cap;
  rec.t1_sft = bound_T1_sft(p_sft, scenario.ref, epsilon);

  // (a) SFT for T1'.
  Scenario sft = scenario;
  sft.mode = Mode::sft_flow;
  sft.p_sft.emplace(p_sft.begin(), p_sft.end());
  sft.horizon = rec.t1_sft;
  sft.record_stride = 1;
  const auto sft_traj = integrate(sft);
  const auto& end = sft_traj.samples.back();
  rec.post_sft_probs = end.probs;
  rec.post_sft_accuracy = end.acc;
  rec.predicted_accuracy = accuracy(task, p_sft);
  rec.accuracy_tolerance = epsilon * *std::max_element(task.success_rates().begin(), task.success_rates().end());
  rec.accuracy_within_tolerance = std::abs(rec.post_sft_accuracy - rec.predicted_accuracy) <= rec.accuracy_tolerance;
  rec.post_sft_sup_gap = sup_gap(p_sft, end.probs);
  const auto cls = classify_regime(task, end.probs);
  rec.post_sft_regime = cls.regime;
  rec.post_sft_regime1 = cls.regime == Regime::regime1;
  if (rec.post_sft_regime1) {
    const auto t1 = bound_T1(task, end.probs, epsilon);
    rec.t1_after_sft = t1.value;
  }
  if (classify_regime(task, scenario.ref.probs()).regime == Regime::regime2) {
    try {
      rec.pure_t0_log10 = bound_T0(task, scenario.ref.probs()).log10;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::degenerate_bound) throw;
    }
  }

  // (b) RLVR from the SFT endpoint, same KL reference.
  rec.sft_target_time = first_crossing(sft_traj, CrossingKind::pattern_prob_above, star, options.target);
  if (rec.sft_target_time) {
    rec.pipeline_time = rec.sft_target_time;
  } else {
    rec.rlvr_after_sft_time =
        detail::time_to_target(scenario, PolicyState::from_probs(end.probs), options.target, options.rlvr_cap);
    if (rec.rlvr_after_sft_time) rec.pipeline_time = rec.t1_sft + *rec.rlvr_after_sft_time;
  }
  rec.pipeline_censored = !rec.pipeline_time;

  // (c) pure RLVR.
  rec.pure_time = detail::time_to_target(scenario, scenario.ref, options.target, options.rlvr_cap);
  rec.pure_censored = !rec.pure_time;
  rec.pipeline_faster = rec.pipeline_time && (rec.pure_censored || *rec.pipeline_time < *rec.pure_time);

  rec.sft_time_to_eps = detail::first_time_gap_below(sft_traj, p_sft, epsilon);
  if (rec.sft_time_to_eps) {
    Scenario early = sft;
    early.horizon = *rec.sft_time_to_eps;
    const auto early_traj = integrate(early);
    const auto& e = early_traj.samples.back();
    if (const auto t = first_crossing(early_traj, CrossingKind::pattern_prob_above, star, options.target)) {
      rec.early_stop_pipeline_time = t;
    } else if (const auto tb = detail::time_to_target(scenario, PolicyState::from_probs(e.probs), options.target,
                                                      options.rlvr_cap)) {
      rec.early_stop_pipeline_time = *rec.sft_time_to_eps + *tb;
    }
  }
  return rec;
}

inline nlohmann::json to_json(const PipelineRecord& r) {
  return {{"epsilon", r.epsilon},
          {"target", r.target},
          {"t1_sft", r.t1_sft},
          {"post_sft_probs", r.post_sft_probs},
          {"post_sft_accuracy", r.post_sft_accuracy},
          {"predicted_accuracy", r.predicted_accuracy},
          {"accuracy_tolerance", r.accuracy_tolerance},
          {"accuracy_within_tolerance", r.accuracy_within_tolerance},
          {"post_sft_sup_gap", r.post_sft_sup_gap},
          {"post_sft_regime", to_string(r.post_sft_regime)},
          {"post_sft_regime1", r.post_sft_regime1},
          {"sft_target_time", optional_json(r.sft_target_time)},
          {"rlvr_after_sft_time", optional_json(r.rlvr_after_sft_time)},
          {"pipeline_time", optional_json(r.pipeline_time)},
          {"pipeline_censored", r.pipeline_censored},
          {"pure_time", optional_json(r.pure_time)},
          {"pure_censored", r.pure_censored},
          {"cap", r.cap},
          {"pipeline_faster", r.pipeline_faster},
          {"t1_after_sft", optional_json(r.t1_after_sft)},
          {"pure_t0_log10", optional_json(r.pure_t0_log10)},
          {"sft_time_to_eps", optional_json(r.sft_time_to_eps)},
          {"early_stop_pipeline_time", optional_json(r.early_stop_pipeline_time)}};
}

}  // namespace rlvr::runner
