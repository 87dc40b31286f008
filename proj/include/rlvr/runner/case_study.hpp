#pragma once

// Built-in case studies: a fast Regime-1 run and two Regime-2 runs, one
// with gamma = 6 and an astronomically large T0, one whose T0 fits inside
// the horizon.

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rlvr/error.hpp"
#include "rlvr/flow.hpp"
#include "rlvr/model.hpp"
#include "rlvr/runner/csv.hpp"
#include "rlvr/runner/files.hpp"
#include "rlvr/runner/report_json.hpp"
#include "rlvr/runner/svg.hpp"
#include "rlvr/theory.hpp"

namespace rlvr::runner {

enum class ExpectationKind {
  pi_star_reaches,     // pi(r*) > threshold before the horizon
  gamma_equals,        // |gamma_ref - threshold| <= tolerance
  t0_log10_near,       // |t0_log10 - threshold| <= tolerance
  entanglement_ratio,  // slowdown against regime1_fast >= threshold
  check_present,       // named verifier check ran (and, like all checks, passed)
};

struct Expectation {
  ExpectationKind kind;
  double threshold = 0.0;
  double tolerance = 0.0;
  std::string check = {};
};

struct CaseStudy {
  std::string name;
  std::string description;
  Scenario scenario;
  std::vector<Expectation> expectations;
};

inline Scenario make_rlvr_scenario(std::vector<double> rates, std::vector<double> ref, double horizon, double step,
                                   std::uint64_t stride) {
  return Scenario{PatternTask::from_rates(rates), PolicyState::from_probs(ref), 0.0, horizon, step, stride, 0,
                  Mode::rlvr_flow, std::nullopt};
}

inline const std::vector<CaseStudy>& case_registry() {
  static const std::vector<CaseStudy> registry = [] {
    std::vector<CaseStudy> r;
    r.push_back({"regime1_fast",
                 "Acc_ref above every non-optimal success rate; pi(r*) rises monotonically",
                 make_rlvr_scenario({0.9, 0.6, 0.1}, {0.5, 0.3, 0.2}, 2000.0, 0.05, 4),
                 {{ExpectationKind::pi_star_reaches, 0.99},
                  {ExpectationKind::check_present, 0.0, 0.0, "pi_star_above_1_minus_eps_at_T1"}}});
    r.push_back({"regime2_entangled_gamma6",
                 "r' beats Acc_ref and pi_ref(r*) is small (gamma = 6); long entanglement stage",
                 make_rlvr_scenario({0.9, 0.6, 0.1}, {0.05, 0.70, 0.25}, 2000.0, 0.05, 4),
                 {{ExpectationKind::gamma_equals, 6.0, 1e-12},
                  {ExpectationKind::t0_log10_near, 43.389, 0.01},
                  {ExpectationKind::entanglement_ratio, 10.0},
                  {ExpectationKind::pi_star_reaches, 0.99}}});
    r.push_back({"regime2_small_t0",
                 "Regime 2 with a T0 bound inside the horizon",
                 make_rlvr_scenario({0.95, 0.5, 0.05}, {0.15, 0.65, 0.20}, 30000.0, 0.1, 50),
                 {{ExpectationKind::check_present, 0.0, 0.0, "acc_above_suboptimal_after_T0"}}});
    return r;
  }();
  return registry;
}

inline const CaseStudy& find_case_study(std::string_view name) {
  for (const auto& c : case_registry())
    if (c.name == name) return c;
  fail(ErrorCode::not_found, "no case study named '" + std::string(name) + "'");
}

/// Slowdown of `slow` against `fast` on the time to close the same relative
/// accuracy gap: `slow` is timed until Acc > p_succ(r'), and that crossing's
/// relative gap (p* - p') / (p* - Acc(0)) sets the target for `fast`.
struct EntanglementMeasure {
  double relative_gap = 0.0;
  std::optional<double> slow_time;
  std::optional<double> fast_time;
  double ratio = 0.0;
};

inline EntanglementMeasure measure_entanglement(const PatternTask& slow_task, const Trajectory& slow,
                                                const PatternTask& fast_task, const Trajectory& fast) {
  EntanglementMeasure m;
  const double p_star = slow_task.success_rate(slow_task.best());
  const double p_second = slow_task.success_rate(slow_task.require_runner_up());
  const double acc0 = slow.samples.front().acc;
  m.relative_gap = (p_star - p_second) / (p_star - acc0);
  m.slow_time = first_crossing(slow, CrossingKind::acc_above, std::nullopt, p_second);

  const double fast_star = fast_task.success_rate(fast_task.best());
  const double fast_acc0 = fast.samples.front().acc;
  m.fast_time = first_crossing(fast, CrossingKind::acc_above, std::nullopt,
                               fast_star - m.relative_gap * (fast_star - fast_acc0));
  if (!m.slow_time) {
    m.ratio = std::numeric_limits<double>::infinity();  // censored: never left the entanglement stage
  } else if (m.fast_time && *m.fast_time > 0.0) {
    m.ratio = *m.slow_time / *m.fast_time;
  } else {
    m.ratio = m.fast_time ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return m;
}

struct CaseStudyResult {
  std::string name;
  RegimeReport report;
  Trajectory trajectory;
  std::optional<double> pi_star_099_time;
  std::optional<EntanglementMeasure> entanglement;
};

namespace detail {

inline std::string fmt_threshold(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline InvariantCheck evaluate(const Expectation& e, const CaseStudy& study, CaseStudyResult& res) {
  const auto& sc = study.scenario;
  switch (e.kind) {
    case ExpectationKind::pi_star_reaches: {
      const auto t = first_crossing(res.trajectory, CrossingKind::pattern_prob_above, sc.task.best(), e.threshold);
      if (e.threshold == 0.99) res.pi_star_099_time = t;
      const double reached = res.trajectory.samples.back().probs[sc.task.best()];
      return {"expect_pi_star_above_" + fmt_threshold(e.threshold), t.has_value() && *t <= sc.horizon,
              std::max(0.0, e.threshold - reached)};
    }
    case ExpectationKind::gamma_equals: {
      const double dev = res.report.gamma ? std::abs(*res.report.gamma - e.threshold)
                                          : std::numeric_limits<double>::infinity();
      return {"expect_gamma_" + fmt_threshold(e.threshold), dev <= e.tolerance, dev};
    }
    case ExpectationKind::t0_log10_near: {
      const double dev = res.report.t0 ? std::abs(res.report.t0->log10 - e.threshold)
                                       : std::numeric_limits<double>::infinity();
      return {"expect_t0_log10_" + fmt_threshold(e.threshold), dev <= e.tolerance, dev};
    }
    case ExpectationKind::entanglement_ratio: {
      const auto& fast_case = find_case_study("regime1_fast");
      const auto fast = integrate(fast_case.scenario);
      res.entanglement = measure_entanglement(sc.task, res.trajectory, fast_case.scenario.task, fast);
      const double r = res.entanglement->ratio;
      return {"expect_entanglement_ratio_" + fmt_threshold(e.threshold), r >= e.threshold,
              std::max(0.0, e.threshold - r)};
    }
    case ExpectationKind::check_present: {
      const auto* c = res.report.find(e.check);
      return {"expect_check_" + e.check, c != nullptr && c->passed, c ? c->worst_violation : 1.0};
    }
  }
  fail(ErrorCode::invalid_input, "unknown expectation kind");
}

}  // namespace detail

inline nlohmann::json case_summary_json(const CaseStudyResult& res, const Scenario& sc) {
  auto j = to_json(res.report);
  j["case"] = res.name;
  j["scenario_digest"] = digest_hex(res.trajectory.scenario_digest);
  j["end_time"] = res.trajectory.end_time;
  j["samples"] = res.trajectory.samples.size();
  j["converged"] = res.trajectory.converged;
  j["final_probs"] = res.trajectory.samples.back().probs;
  j["pi_star_099_time"] = optional_json(res.pi_star_099_time);
  if (res.entanglement) {
    const auto& e = *res.entanglement;
    j["entanglement"] = {{"relative_gap", e.relative_gap},
                         {"slow_time", optional_json(e.slow_time)},
                         {"fast_time", optional_json(e.fast_time)},
                         {"ratio", std::isfinite(e.ratio) ? nlohmann::json(e.ratio) : nlohmann::json("inf")}};
  }
  j["scenario"] = {{"patterns", sc.task.size()}, {"horizon", sc.horizon}, {"step", sc.step}};
  return j;
}

/// Writes trajectory.csv, trajectory.svg and summary.json into output_dir
/// (skipped when output_dir is empty). Files are only written once every
/// computation has succeeded.
inline CaseStudyResult run_case_study(std::string_view name, const std::filesystem::path& output_dir) {
  const auto& study = find_case_study(name);
  CaseStudyResult res;
  res.name = study.name;
  res.trajectory = integrate(study.scenario);
  res.report = verify_trajectory(study.scenario, res.trajectory);
  for (const auto& e : study.expectations) res.report.checks.push_back(detail::evaluate(e, study, res));

  if (!output_dir.empty()) {
    std::vector<std::string> series{"acc"};
    for (std::size_t i = 1; i <= study.scenario.task.size(); ++i) series.push_back("pi_" + std::to_string(i));
    SvgOptions svg;
    svg.title = study.name;
    const auto csv_text = format_csv(res.trajectory);
    const auto svg_text = render_svg(res.trajectory, series, svg);
    const auto summary = case_summary_json(res, study.scenario).dump(2) + "\n";
    write_file_atomic(output_dir / "trajectory.csv", csv_text);
    write_file_atomic(output_dir / "trajectory.svg", svg_text);
    write_file_atomic(output_dir / "summary.json", summary);
  }
  return res;
}

}  // namespace rlvr::runner
