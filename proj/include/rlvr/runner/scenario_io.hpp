#pragma once

// Scenario documents:
//
//   {
//     "patterns": [{"name": "r1", "p_succ": 0.9, "pi_ref": 0.5}, ...],
//     "beta": 0, "horizon": 2000, "step": 0.1, "record_stride": 1,
//     "seed": 7, "mode": "rlvr_flow",
//     "p_sft": [...]            // sft_flow only
//   }

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rlvr/error.hpp"
#include "rlvr/model.hpp"
#include "rlvr/runner/files.hpp"

namespace rlvr::runner {

using nlohmann::json;

inline constexpr double kRenormalizeTolerance = 1e-3;

namespace detail {

inline const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) fail(ErrorCode::parse, "missing field '" + path + key + "'");
  return obj.at(key);
}

inline double number(const json& obj, const std::string& key, const std::string& path = "") {
  const auto& v = field(obj, key, path);
  if (!v.is_number()) fail(ErrorCode::parse, "field '" + path + key + "' must be a number");
  return v.get<double>();
}

inline std::uint64_t unsigned_integer(const json& obj, const std::string& key) {
  const auto& v = field(obj, key, "");
  if (!v.is_number_unsigned()) fail(ErrorCode::parse, "field '" + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline Mode parse_mode(const json& obj) {
  const auto& v = field(obj, "mode", "");
  if (!v.is_string()) fail(ErrorCode::parse, "field 'mode' must be a string");
  const auto s = v.get<std::string>();
  if (s == "rlvr_flow") return Mode::rlvr_flow;
  if (s == "sft_flow") return Mode::sft_flow;
  if (s == "sampled") return Mode::sampled;
  fail(ErrorCode::parse, "unknown mode '" + s + "'");
}

}  // namespace detail

inline Scenario load_scenario(std::string_view source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::parse, "scenario document must be a JSON object");

  const auto& pats = detail::field(doc, "patterns", "");
  if (!pats.is_array()) fail(ErrorCode::parse, "field 'patterns' must be an array");
  std::vector<Pattern> patterns;
  std::vector<double> ref;
  for (std::size_t i = 0; i < pats.size(); ++i) {
    const std::string path = "patterns[" + std::to_string(i) + "].";
    const auto& name = detail::field(pats[i], "name", path);
    if (!name.is_string()) fail(ErrorCode::parse, "field '" + path + "name' must be a string");
    patterns.push_back({name.get<std::string>(), detail::number(pats[i], "p_succ", path)});
    ref.push_back(detail::number(pats[i], "pi_ref", path));
  }
  // Read every scalar before validating so missing fields surface as parse errors.
  const double beta = detail::number(doc, "beta");
  const double horizon = detail::number(doc, "horizon");
  const double step = detail::number(doc, "step");
  const auto stride = detail::unsigned_integer(doc, "record_stride");
  const auto seed = detail::unsigned_integer(doc, "seed");
  const Mode mode = detail::parse_mode(doc);
  std::optional<std::vector<double>> p_sft;
  if (mode == Mode::sft_flow) {
    const auto& arr = detail::field(doc, "p_sft", "");
    if (!arr.is_array()) fail(ErrorCode::parse, "field 'p_sft' must be an array");
    p_sft.emplace();
    for (const auto& x : arr) {
      if (!x.is_number()) fail(ErrorCode::parse, "field 'p_sft' must contain numbers");
      p_sft->push_back(x.get<double>());
    }
  }

  for (const auto& p : patterns)
    require(std::isfinite(p.p_succ) && p.p_succ >= 0.0 && p.p_succ <= 1.0, ErrorCode::validation,
            "p_succ of pattern '" + p.name + "' lies outside [0,1]");
  require(patterns.size() >= 2, ErrorCode::validation, "a scenario needs at least two patterns");
  double sum = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    require(std::isfinite(ref[i]) && ref[i] > 0.0, ErrorCode::validation,
            "pi_ref of pattern '" + patterns[i].name + "' must be strictly positive");
    sum += ref[i];
  }
  require(std::abs(sum - 1.0) <= kRenormalizeTolerance, ErrorCode::validation,
          "pi_ref sums to " + std::to_string(sum) + ", outside the renormalization tolerance");
  for (double& r : ref) r /= sum;

  if (p_sft) {
    require(p_sft->size() == patterns.size(), ErrorCode::validation, "p_sft length does not match patterns");
    double s = 0.0;
    for (double x : *p_sft) {
      require(std::isfinite(x) && x >= 0.0, ErrorCode::validation, "p_sft entries must be non-negative");
      s += x;
    }
    require(std::abs(s - 1.0) <= kSimplexTolerance, ErrorCode::validation, "p_sft does not sum to 1");
  }

  PatternTask task(std::move(patterns));
  require(task.has_unique_best(), ErrorCode::ill_posed_task, "maximum success rate is attained by more than one pattern");
  Scenario sc{std::move(task), PolicyState::from_probs(ref), beta, horizon, step, stride, seed, mode, std::move(p_sft)};
  try {
    validate(sc);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::invalid_input) fail(ErrorCode::validation, e.what());
    throw;
  }
  return sc;
}

inline Scenario load_scenario_file(const std::filesystem::path& path) { return load_scenario(read_file(path)); }

inline json scenario_to_json(const Scenario& s) {
  json pats = json::array();
  for (std::size_t i = 0; i < s.task.size(); ++i) {
    const auto& p = s.task.patterns()[i];
    pats.push_back({{"name", p.name}, {"p_succ", p.p_succ}, {"pi_ref", s.ref.prob(i)}});
  }
  json doc = {{"patterns", pats},          {"beta", s.beta}, {"horizon", s.horizon},
              {"step", s.step},            {"record_stride", s.record_stride},
              {"seed", s.seed},            {"mode", to_string(s.mode)}};
  if (s.p_sft) doc["p_sft"] = *s.p_sft;
  return doc;
}

inline std::string serialize_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

}  // namespace rlvr::runner
