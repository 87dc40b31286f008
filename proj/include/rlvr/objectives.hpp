#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "rlvr/error.hpp"
#include "rlvr/model.hpp"

namespace rlvr {

/// Derivative of an objective with respect to the K pattern logits. Softmax
/// gradients are orthogonal to the all-ones direction, so entries sum to 0.
struct GradientVector {
  std::vector<double> entries;

  std::size_t size() const noexcept { return entries.size(); }
  double operator[](std::size_t i) const { return entries[i]; }
  double& operator[](std::size_t i) { return entries[i]; }
  operator std::span<const double>() const noexcept { return entries; }

  double sum() const { return std::accumulate(entries.begin(), entries.end(), 0.0); }
  double max_abs() const {
    double m = 0.0;
    for (double e : entries) m = std::max(m, std::abs(e));
    return m;
  }
};

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  require(a == b, ErrorCode::invalid_input, std::string(what) + ": dimension mismatch");
}

inline void require_beta(double beta) {
  require(std::isfinite(beta) && beta >= 0.0, ErrorCode::invalid_input, "beta must be non-negative");
}

}  // namespace detail

/// KL(p || q) over patterns; q must cover the support of p.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  detail::require_same_size(p.size(), q.size(), "kl_divergence");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    require(q[i] > 0.0, ErrorCode::invalid_input, "KL reference lacks support");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

/// E_pi[p_succ] - beta * KL(pi || pi_ref).
inline double rlvr_objective(const PatternTask& task, const PolicyState& state, const PolicyState& ref, double beta) {
  detail::require_same_size(state.size(), task.size(), "rlvr_objective");
  detail::require_same_size(ref.size(), task.size(), "rlvr_objective");
  detail::require_beta(beta);
  const double acc = accuracy(task, state.probs());
  if (beta == 0.0) return acc;
  return acc - beta * kl_divergence(state.probs(), ref.probs());
}

/// Exact logit gradient of rlvr_objective:
///   g_i = pi_i (p_i - Acc) + beta pi_i [ sum_j pi_j log(pi_j/ref_j) - log(pi_i/ref_i) ].
inline GradientVector rlvr_grad(const PatternTask& task, const PolicyState& state, const PolicyState& ref,
                                double beta) {
  detail::require_same_size(state.size(), task.size(), "rlvr_grad");
  detail::require_same_size(ref.size(), task.size(), "rlvr_grad");
  detail::require_beta(beta);
  const auto pi = state.probs();
  const std::size_t k = pi.size();
  const double acc = accuracy(task, pi);
  GradientVector g{std::vector<double>(k)};
  for (std::size_t i = 0; i < k; ++i) g[i] = pi[i] * (task.success_rate(i) - acc);
  if (beta > 0.0) {
    // log(pi/ref) from the logits keeps precision when pi_i underflows.
    const auto log_pi = log_softmax(state.logits());
    const auto log_ref = log_softmax(ref.logits());
    std::vector<double> log_ratio(k);
    double mean_log_ratio = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      log_ratio[i] = log_pi[i] - log_ref[i];
      mean_log_ratio += pi[i] * log_ratio[i];
    }
    for (std::size_t i = 0; i < k; ++i) g[i] += beta * pi[i] * (mean_log_ratio - log_ratio[i]);
  }
  return g;
}

/// Pattern-marginal SFT cross-entropy -sum_r p_sft(r) log pi(r).
inline double sft_loss(std::span<const double> p_sft, const PolicyState& state) {
  require_distribution(p_sft, state.size(), "p_sft");
  const auto log_pi = log_softmax(state.logits());
  double loss = 0.0;
  for (std::size_t i = 0; i < p_sft.size(); ++i)
    if (p_sft[i] > 0.0) loss -= p_sft[i] * log_pi[i];
  return loss;
}

/// Descent direction of sft_loss in logit space: p_sft - pi.
inline GradientVector sft_flow_direction(std::span<const double> p_sft, const PolicyState& state) {
  require_distribution(p_sft, state.size(), "p_sft");
  GradientVector g{std::vector<double>(state.size())};
  for (std::size_t i = 0; i < state.size(); ++i) g[i] = p_sft[i] - state.prob(i);
  return g;
}

/// pi_opt(r) ∝ exp(p_succ(r)/beta) pi_ref(r), evaluated as a log-space softmax.
inline std::vector<double> optimal_policy_closed_form(const PatternTask& task, std::span<const double> ref_probs,
                                                      double beta) {
  require(std::isfinite(beta) && beta > 0.0, ErrorCode::invalid_input,
          "closed-form optimum needs beta > 0; use optimal_policy_beta_zero for beta = 0");
  require_distribution(ref_probs, task.size(), "reference distribution");
  std::vector<double> w(task.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    require(ref_probs[i] > 0.0, ErrorCode::invalid_input, "reference distribution must have full support");
    w[i] = task.success_rate(i) / beta + std::log(ref_probs[i]);
  }
  return softmax(w);
}

/// beta -> 0 limit: all mass on r*.
inline std::vector<double> optimal_policy_beta_zero(const PatternTask& task, std::span<const double> ref_probs) {
  require_distribution(ref_probs, task.size(), "reference distribution");
  for (double p : ref_probs)
    require(p > 0.0, ErrorCode::invalid_input, "reference distribution must have full support");
  std::vector<double> out(task.size(), 0.0);
  out[task.best()] = 1.0;
  return out;
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  detail::require_same_size(p.size(), q.size(), "total_variation");
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

inline double sup_gap(std::span<const double> p, std::span<const double> q) {
  detail::require_same_size(p.size(), q.size(), "sup_gap");
  double m = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) m = std::max(m, std::abs(p[i] - q[i]));
  return m;
}

}  // namespace rlvr
