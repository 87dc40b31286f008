#pragma once

// Tabular question -> reasoning pattern -> answer model with fixed
// per-pattern success rates. Only the q-column of the logit table evolves,
// so a policy is a K-vector of logits over the reasoning patterns.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlvr/error.hpp"

namespace rlvr {

inline constexpr double kSimplexTolerance = 1e-9;

struct Pattern {
  std::string name;
  double p_succ = 0.0;
};

/// Reasoning-pattern set with fixed success rates. Ties are representable
/// (an all-equal task is a stationary point of every flow), but anything
/// that needs r* or r' throws ill_posed_task when they are not unique.
class PatternTask {
 public:
  explicit PatternTask(std::vector<Pattern> patterns) : patterns_(std::move(patterns)) {
    require(patterns_.size() >= 2, ErrorCode::invalid_input, "a task needs at least two patterns");
    rates_.reserve(patterns_.size());
    for (const auto& p : patterns_) {
      require(std::isfinite(p.p_succ) && p.p_succ >= 0.0 && p.p_succ <= 1.0, ErrorCode::validation,
              "success rate of pattern '" + p.name + "' must lie in [0,1]");
      rates_.push_back(p.p_succ);
    }
    std::vector<std::size_t> order(rates_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rates_[a] > rates_[b]; });
    if (rates_[order[0]] > rates_[order[1]]) {
      best_ = order[0];
      if (order.size() == 2 || rates_[order[1]] > rates_[order[2]]) runner_up_ = order[1];
    }
  }

  /// Convenience constructor with generated names r1..rK.
  static PatternTask from_rates(std::span<const double> rates) {
    std::vector<Pattern> ps;
    ps.reserve(rates.size());
    for (std::size_t i = 0; i < rates.size(); ++i) ps.push_back({"r" + std::to_string(i + 1), rates[i]});
    return PatternTask(std::move(ps));
  }

  std::size_t size() const noexcept { return patterns_.size(); }
  const std::vector<Pattern>& patterns() const noexcept { return patterns_; }
  std::span<const double> success_rates() const noexcept { return rates_; }
  double success_rate(std::size_t i) const { return rates_.at(i); }

  bool has_unique_best() const noexcept { return best_.has_value(); }

  std::size_t best() const {
    require(best_.has_value(), ErrorCode::ill_posed_task, "maximum success rate is attained by more than one pattern");
    return *best_;
  }
  std::optional<std::size_t> runner_up() const noexcept { return runner_up_; }

  std::size_t require_runner_up() const {
    require(runner_up_.has_value(), ErrorCode::ill_posed_task,
            "second-highest success rate is attained by more than one pattern");
    return *runner_up_;
  }

  /// p_succ(r*) - p_succ(r').
  double gap() const { return rates_[best()] - rates_[require_runner_up()]; }

  /// Task whose pattern i is this task's pattern perm[i].
  PatternTask permuted(std::span<const std::size_t> perm) const {
    require(perm.size() == size(), ErrorCode::invalid_input, "permutation length mismatch");
    std::vector<Pattern> ps;
    ps.reserve(size());
    for (auto j : perm) ps.push_back(patterns_.at(j));
    return PatternTask(std::move(ps));
  }

 private:
  std::vector<Pattern> patterns_;
  std::vector<double> rates_;
  std::optional<std::size_t> best_;
  std::optional<std::size_t> runner_up_;
};

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) require(std::isfinite(x), ErrorCode::invalid_input, std::string(what) + " has a non-finite entry");
}

inline void require_distribution(std::span<const double> probs, std::size_t k, const char* what) {
  require(probs.size() == k, ErrorCode::invalid_input,
          std::string(what) + " has length " + std::to_string(probs.size()) + ", expected " + std::to_string(k));
  double sum = 0.0;
  for (double p : probs) {
    require(std::isfinite(p) && p >= 0.0, ErrorCode::invalid_input, std::string(what) + " has a negative entry");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= kSimplexTolerance, ErrorCode::invalid_input,
          std::string(what) + " does not sum to 1");
}

/// Max-shifted softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorCode::invalid_input, "softmax of an empty vector");
  require_finite(logits, "logit vector");
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - shift);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorCode::invalid_input, "log_softmax of an empty vector");
  const double shift = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - shift);
  const double log_z = shift + std::log(z);
  std::vector<double> out(logits.begin(), logits.end());
  for (double& l : out) l -= log_z;
  return out;
}

inline std::vector<double> centered(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x -= mean;
  return out;
}

/// Centered log-probabilities; zero entries are rejected because the KL
/// reference would lose support.
inline std::vector<double> logits_from_probs(std::span<const double> probs) {
  require(!probs.empty(), ErrorCode::invalid_input, "empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    require(std::isfinite(p) && p > 0.0, ErrorCode::invalid_input,
            "probability entries must be strictly positive to take logits");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= kSimplexTolerance, ErrorCode::invalid_input, "probabilities do not sum to 1");
  std::vector<double> logs(probs.size());
  std::transform(probs.begin(), probs.end(), logs.begin(), [](double p) { return std::log(p); });
  return centered(logs);
}

/// Logit column with its cached softmax; logits stay mean-centered.
class PolicyState {
 public:
  PolicyState() = default;

  static PolicyState from_logits(std::span<const double> logits) {
    PolicyState s;
    s.set_logits(logits);
    return s;
  }
  static PolicyState from_probs(std::span<const double> probs) { return from_logits(logits_from_probs(probs)); }
  static PolicyState uniform(std::size_t k) { return from_logits(std::vector<double>(k, 0.0)); }

  std::size_t size() const noexcept { return logits_.size(); }
  std::span<const double> logits() const noexcept { return logits_; }
  std::span<const double> probs() const noexcept { return probs_; }
  double prob(std::size_t i) const { return probs_.at(i); }

  void set_logits(std::span<const double> logits) {
    require(!logits.empty(), ErrorCode::invalid_input, "empty logit vector");
    require_finite(logits, "logit vector");
    logits_ = centered(logits);
    probs_ = softmax(logits_);
  }

  /// logits += scale * direction, then re-center.
  void advance(std::span<const double> direction, double scale) {
    require(direction.size() == size(), ErrorCode::invalid_input, "direction length mismatch");
    std::vector<double> next(logits_);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += scale * direction[i];
    set_logits(next);
  }

 private:
  std::vector<double> logits_;
  std::vector<double> probs_;
};

inline double accuracy(const PatternTask& task, std::span<const double> probs) {
  require(probs.size() == task.size(), ErrorCode::invalid_input, "probability vector length does not match task");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) acc += probs[i] * task.success_rate(i);
  return acc;
}

enum class Regime { regime1, regime2, neither };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::regime1: return "Regime1";
    case Regime::regime2: return "Regime2";
    case Regime::neither: return "Neither";
  }
  return "?";
}

struct RegimeClassification {
  Regime regime = Regime::neither;
  double acc_ref = 0.0;
  /// Acc_ref coincides with some non-optimal success rate.
  bool boundary_equality = false;
};

/// Accuracies within this distance of a success rate count as equal.
inline constexpr double kBoundaryTolerance = 1e-12;

inline RegimeClassification classify_regime(const PatternTask& task, std::span<const double> ref_probs) {
  require_distribution(ref_probs, task.size(), "reference distribution");
  RegimeClassification out;
  out.acc_ref = accuracy(task, ref_probs);
  const std::size_t star = task.best();
  bool beats_all_others = true;
  for (std::size_t i = 0; i < task.size(); ++i) {
    if (i == star) continue;
    const double diff = out.acc_ref - task.success_rate(i);
    if (std::abs(diff) <= kBoundaryTolerance) out.boundary_equality = true;
    if (diff <= kBoundaryTolerance) beats_all_others = false;
  }
  if (out.boundary_equality) return out;
  if (beats_all_others) {
    out.regime = Regime::regime1;
    return out;
  }
  if (auto second = task.runner_up()) {
    bool regime2 = task.success_rate(*second) > out.acc_ref;
    for (std::size_t i = 0; regime2 && i < task.size(); ++i) {
      if (i == star || i == *second) continue;
      regime2 = out.acc_ref > task.success_rate(i);
    }
    if (regime2) out.regime = Regime::regime2;
  }
  return out;
}

enum class Mode { rlvr_flow, sft_flow, sampled };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::rlvr_flow: return "rlvr_flow";
    case Mode::sft_flow: return "sft_flow";
    case Mode::sampled: return "sampled";
  }
  return "?";
}

/// The unit of experiment. `ref` is both the KL reference and theta(0).
struct Scenario {
  PatternTask task;
  PolicyState ref;
  double beta = 0.0;
  double horizon = 0.0;
  double step = 0.1;
  std::uint64_t record_stride = 1;
  std::uint64_t seed = 0;
  Mode mode = Mode::rlvr_flow;
  std::optional<std::vector<double>> p_sft = {};
};

inline void validate(const Scenario& s) {
  require(s.ref.size() == s.task.size(), ErrorCode::validation, "reference policy length does not match task");
  require(std::isfinite(s.beta) && s.beta >= 0.0, ErrorCode::validation, "beta must be non-negative");
  require(std::isfinite(s.horizon) && s.horizon >= 0.0, ErrorCode::validation, "horizon must be non-negative");
  require(std::isfinite(s.step) && s.step > 0.0, ErrorCode::validation, "step must be positive");
  require(s.record_stride >= 1, ErrorCode::validation, "record_stride must be at least 1");
  if (s.mode == Mode::sft_flow) {
    require(s.p_sft.has_value(), ErrorCode::validation, "sft_flow scenario requires p_sft");
    require_distribution(*s.p_sft, s.task.size(), "p_sft");
  }
}

}  // namespace rlvr
