#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rlvr/rlvr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rlvr;
using namespace rlvr::runner;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kCheckFailed = 2;
constexpr int kIoError = 3;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::io: return kIoError;
    case ErrorCode::integration_diverged:
    case ErrorCode::training_diverged: return kCheckFailed;
    default: return kInputError;
  }
}

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void print_checks(const RegimeReport& rep) {
  for (const auto& c : rep.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (worst violation " << fmt(c.worst_violation) << ")\n";
  for (const auto& n : rep.notes) std::cout << "note: " << n << "\n";
}

json bounds_json(const Scenario& sc, double epsilon) {
  const auto ref = sc.ref.probs();
  const auto cls = classify_regime(sc.task, ref);
  json j = {{"regime", to_string(cls.regime)},
            {"boundary_equality", cls.boundary_equality},
            {"acc_ref", cls.acc_ref},
            {"epsilon", epsilon},
            {"gamma", nullptr},
            {"t0", nullptr},
            {"t1", nullptr},
            {"t1_sft", nullptr}};
  if (sc.task.runner_up()) j["gamma"] = gamma_ref(sc.task, ref);
  if (cls.regime == Regime::regime2) {
    try {
      j["t0"] = to_json(bound_T0(sc.task, ref));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::degenerate_bound) throw;
      j["t0_note"] = "C1 * gamma <= 1: bound is vacuous";
    }
  }
  if (cls.regime == Regime::regime1) j["t1"] = to_json(bound_T1(sc.task, ref, epsilon));
  if (sc.p_sft && std::all_of(sc.p_sft->begin(), sc.p_sft->end(), [](double p) { return p > 0.0; }))
    j["t1_sft"] = bound_T1_sft(*sc.p_sft, sc.ref, epsilon);
  return j;
}

int cmd_simulate(const std::string& path, const fs::path& out, bool svg) {
  const auto sc = load_scenario_file(path);
  const auto traj = integrate(sc);
  const auto rep = verify_trajectory(sc, traj);
  auto summary = to_json(rep);
  summary["scenario_digest"] = digest_hex(traj.scenario_digest);
  summary["end_time"] = traj.end_time;
  summary["converged"] = traj.converged;
  summary["samples"] = traj.samples.size();
  summary["final_probs"] = traj.samples.back().probs;
  const auto csv_text = format_csv(traj);
  std::string svg_text;
  if (svg) {
    std::vector<std::string> series{"acc"};
    for (std::size_t i = 1; i <= sc.task.size(); ++i) series.push_back("pi_" + std::to_string(i));
    svg_text = render_svg(traj, series);
  }
  write_file_atomic(out / "trajectory.csv", csv_text);
  if (svg) write_file_atomic(out / "trajectory.svg", svg_text);
  write_file_atomic(out / "summary.json", summary.dump(2) + "\n");
  std::cout << "regime " << to_string(rep.regime) << ", " << traj.samples.size() << " samples to t="
            << fmt(traj.end_time) << "\n";
  print_checks(rep);
  return rep.all_passed() ? kOk : kCheckFailed;
}

int cmd_regime(const std::string& path, double epsilon) {
  const auto sc = load_scenario_file(path);
  const auto b = bounds_json(sc, epsilon);
  std::cout << "regime: " << b["regime"].get<std::string>() << (b["boundary_equality"].get<bool>() ? " (boundary)" : "")
            << "\n";
  std::cout << "acc_ref: " << fmt(b["acc_ref"].get<double>()) << "\n";
  std::cout << "gamma: " << (b["gamma"].is_null() ? std::string("n/a") : fmt(b["gamma"].get<double>())) << "\n";
  if (b["t0"].is_null()) {
    std::cout << "t0_log10: n/a\nt0: n/a\n";
  } else {
    std::cout << "t0_log10: " << fmt(b["t0"]["log10"].get<double>()) << "\n";
    std::cout << "t0: " << (b["t0"]["value"].is_null() ? std::string("overflow") : fmt(b["t0"]["value"].get<double>()))
              << "\n";
  }
  std::cout << "t1(eps=" << fmt(epsilon) << "): ";
  if (b["t1"].is_null())
    std::cout << "n/a\n";
  else
    std::cout << fmt(b["t1"]["value"].get<double>()) << (b["t1"]["already_satisfied"].get<bool>() ? " (already satisfied)" : "")
              << "\n";
  return kOk;
}

int cmd_bounds(const std::string& path, double epsilon) {
  std::cout << bounds_json(load_scenario_file(path), epsilon).dump(2) << "\n";
  return kOk;
}

int cmd_case(const std::string& name, fs::path out) {
  if (out.empty()) out = fs::path("out") / name;
  const auto res = run_case_study(name, out);
  std::cout << "case " << res.name << ": regime " << to_string(res.report.regime) << ", output in " << out.string()
            << "\n";
  print_checks(res.report);
  return res.report.all_passed() ? kOk : kCheckFailed;
}

int cmd_sample(const std::string& path, const SamplerConfig& base, std::uint64_t seeds, const fs::path& out) {
  auto sc = load_scenario_file(path);
  sc.mode = Mode::sampled;
  sc.p_sft.reset();
  SamplerConfig cfg = base;
  cfg.beta = sc.beta;
  cfg.seed = sc.seed;
  json runs = json::array();
  std::vector<std::string> texts;
  for (std::uint64_t i = 0; i < seeds; ++i) {
    const auto traj = train_sampler(sc, cfg, i);
    const auto& probs = traj.samples.back().probs;
    const auto argmax = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    runs.push_back({{"stream", i},
                    {"final_probs", probs},
                    {"final_acc", traj.samples.back().acc},
                    {"argmax", sc.task.patterns()[argmax].name}});
    texts.push_back(format_csv(traj));
    std::cout << "stream " << i << ": argmax " << sc.task.patterns()[argmax].name << ", acc "
              << fmt(traj.samples.back().acc) << "\n";
  }
  for (std::uint64_t i = 0; i < seeds; ++i) write_file_atomic(out / ("sample_" + std::to_string(i) + ".csv"), texts[i]);
  json summary = {{"scenario_digest", digest_hex(scenario_digest(sc))},
                  {"batch_size", cfg.batch_size},
                  {"learning_rate", cfg.learning_rate},
                  {"steps", cfg.steps},
                  {"baseline", cfg.baseline == Baseline::none ? "none" : "batch_mean"},
                  {"runs", runs}};
  write_file_atomic(out / "sample_summary.json", summary.dump(2) + "\n");
  return kOk;
}

int cmd_pipeline(const std::string& path, const std::vector<double>& p_sft, double epsilon) {
  const auto sc = load_scenario_file(path);
  std::cout << to_json(run_pipeline(sc, p_sft, epsilon)).dump(2) << "\n";
  return kOk;
}

int cmd_verify(const std::string& csv_path, const std::string& scenario_path) {
  const auto sc = load_scenario_file(scenario_path);
  auto traj = load_csv_file(csv_path);
  const std::string want = digest_hex(scenario_digest(sc));
  const auto summary_path = fs::path(csv_path).parent_path() / "summary.json";
  if (fs::exists(summary_path)) {
    json s;
    try {
      s = json::parse(read_file(summary_path));
    } catch (const json::parse_error&) {
      fail(ErrorCode::parse, "malformed " + summary_path.string());
    }
    if (s.contains("scenario_digest") && s["scenario_digest"].get<std::string>() != want)
      fail(ErrorCode::provenance, "trajectory was produced by scenario " + s["scenario_digest"].get<std::string>() +
                                      ", not " + want);
  } else {
    require(!traj.samples.empty() && traj.pattern_count == sc.task.size(), ErrorCode::provenance,
            "trajectory shape does not match the scenario");
    const auto& first = traj.samples.front().probs;
    for (std::size_t i = 0; i < first.size(); ++i)
      require(std::abs(first[i] - sc.ref.prob(i)) <= kSimplexTolerance, ErrorCode::provenance,
              "trajectory does not start at the scenario's reference policy");
  }
  traj.mode = sc.mode;
  traj.scenario_digest = scenario_digest(sc);
  const auto rep = verify_trajectory(sc, traj);
  print_checks(rep);
  return rep.all_passed() ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-flow simulator for verifiable-reward RL on a tabular pattern model"};
  app.require_subcommand(1);

  std::string scenario, csv, name;
  std::string out, case_out;
  bool svg = false;
  double epsilon = 0.05;
  SamplerConfig cfg;
  std::uint64_t seeds = 1;
  std::string baseline = "none";
  std::vector<double> p_sft;

  auto* sim = app.add_subcommand("simulate", "integrate a scenario and write CSV, summary and optional SVG");
  sim->add_option("scenario", scenario, "scenario JSON")->required();
  sim->add_option("--out", out, "output directory")->default_val("out");
  sim->add_flag("--svg", svg, "also write trajectory.svg");

  auto* reg = app.add_subcommand("regime", "classify the initialization and print the bounds");
  reg->add_option("scenario", scenario)->required();
  reg->add_option("--epsilon", epsilon)->default_val(0.05);

  auto* bnd = app.add_subcommand("bounds", "print all applicable bounds as JSON");
  bnd->add_option("scenario", scenario)->required();
  bnd->add_option("--epsilon", epsilon)->default_val(0.05);

  auto* cas = app.add_subcommand("case", "run a built-in case study");
  cas->add_option("name", name, "regime1_fast | regime2_entangled_gamma6 | regime2_small_t0")->required();
  cas->add_option("--out", case_out, "output directory (default out/<name>)");

  auto* smp = app.add_subcommand("sample", "stochastic REINFORCE training");
  smp->add_option("scenario", scenario)->required();
  smp->add_option("--batch", cfg.batch_size)->required();
  smp->add_option("--lr", cfg.learning_rate)->required();
  smp->add_option("--steps", cfg.steps)->required();
  smp->add_option("--seeds", seeds, "number of independent streams")->default_val(1);
  smp->add_option("--baseline", baseline)->check(CLI::IsMember({"none", "batch_mean"}))->default_val("none");
  smp->add_option("--out", out, "output directory")->default_val("out");

  auto* pip = app.add_subcommand("pipeline", "compare SFT-then-RLVR with pure RLVR");
  pip->add_option("scenario", scenario)->required();
  pip->add_option("--p-sft", p_sft, "SFT pattern distribution, comma separated")->delimiter(',')->required();
  pip->add_option("--epsilon", epsilon)->default_val(0.05);

  auto* ver = app.add_subcommand("verify", "re-run invariant checks on a stored trajectory");
  ver->add_option("trajectory", csv, "trajectory CSV")->required();
  ver->add_option("scenario", scenario)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*sim) return cmd_simulate(scenario, out, svg);
    if (*reg) return cmd_regime(scenario, epsilon);
    if (*bnd) return cmd_bounds(scenario, epsilon);
    if (*cas) return cmd_case(name, case_out);
    if (*smp) {
      cfg.baseline = baseline == "batch_mean" ? Baseline::batch_mean : Baseline::none;
      return cmd_sample(scenario, cfg, seeds, out);
    }
    if (*pip) return cmd_pipeline(scenario, p_sft, epsilon);
    if (*ver) return cmd_verify(csv, scenario);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
