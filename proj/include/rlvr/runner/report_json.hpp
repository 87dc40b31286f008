#pragma once

#include <optional>

#include "json.hpp"
#include "rlvr/theory.hpp"

namespace rlvr::runner {

using nlohmann::json;

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json to_json(const T0Bound& b) {
  return {{"log10", b.log10},   {"value", optional_json(b.value)}, {"gamma", b.gamma},
          {"delta", b.delta},   {"c1", b.c1},                      {"c2", b.c2},
          {"prefactor", b.prefactor}};
}

inline json to_json(const T1Bound& b) { return {{"value", b.value}, {"already_satisfied", b.already_satisfied}}; }

inline json to_json(const InvariantCheck& c) {
  return {{"name", c.name}, {"passed", c.passed}, {"worst_violation", c.worst_violation}};
}

inline json to_json(const RegimeReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  return {{"regime", to_string(r.regime)},
          {"boundary_equality", r.boundary_equality},
          {"acc_ref", r.acc_ref},
          {"epsilon", r.epsilon},
          {"gamma", optional_json(r.gamma)},
          {"t0", r.t0 ? to_json(*r.t0) : json(nullptr)},
          {"t1", r.t1 ? to_json(*r.t1) : json(nullptr)},
          {"t1_sft", optional_json(r.t1_sft)},
          {"all_passed", r.all_passed()},
          {"checks", checks},
          {"notes", r.notes}};
}

}  // namespace rlvr::runner
