#pragma once

// Discounted risk-sensitive dynamic programming in log form:
//
//   w(x) = min_{a in A(x)} [ gamma * min(N, c(x,a)) + log sum_y q(y|x,a) e^{beta w(y)} ]
//
// The right-hand side T is monotone and a beta-contraction in sup norm
// (log-sum-exp is 1-Lipschitz), so value iteration from w = 0 climbs
// monotonically to the unique fixed point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rsmdp/entropy.hpp"
#include "rsmdp/errors.hpp"
#include "rsmdp/model.hpp"

namespace rsmdp {

/// Cost truncation level N (c^N = min(N, c)) or none.
class Truncation {
 public:
  static Truncation none() { return Truncation{}; }

  static Truncation at(std::int64_t level) {
    if (level < 1) throw DomainError("truncation level must be a positive integer");
    Truncation t;
    t.level_ = level;
    return t;
  }

  bool active() const { return level_.has_value(); }
  std::int64_t level() const { return level_.value(); }
  double apply(double c) const { return level_ ? std::min(static_cast<double>(*level_), c) : c; }

  bool operator==(const Truncation&) const = default;

 private:
  std::optional<std::int64_t> level_;
};

struct LogValueFunction {
  std::vector<double> values;
  double beta = 0.0;
  double gamma = 0.0;
  Truncation truncation;
};

struct DiscountedSolution {
  LogValueFunction value;
  StationaryPolicy policy;
  std::size_t iterations = 0;
  double residual = 0.0;         // a-posteriori bound on ||w - w*||_inf
  bool ill_conditioned = false;  // 1 - beta < 1e-6
};

inline constexpr double kIllConditionedGap = 1e-6;
inline constexpr double kTieTolerance = 1e-12;
inline constexpr std::size_t kStallLimit = 2000;

namespace detail {

inline void check_discount(double beta, double gamma) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("discount factor must lie in (0,1)");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("risk factor must be positive");
}

/// Lowest-label argmin with a relative tie band.
struct ArgminTracker {
  double best = kInfinity;
  std::size_t slot = 0;
  int label = std::numeric_limits<int>::max();

  void offer(double v, std::size_t s, int lbl) {
    const double band = kTieTolerance * std::max(1.0, std::abs(best));
    if (v < best - band) {
      best = v;
      slot = s;
      label = lbl;
    } else if (v <= best + band) {
      if (lbl < label) {
        slot = s;
        label = lbl;
      }
      best = std::min(best, v);
    }
  }
};

/// Flattened model with precomputed log-probabilities and a scratch buffer for
/// e^{beta w(y) - max}. Each row's log-MGF is anchored at its own largest
/// support term, so a point-mass row returns beta*w(y) with no rounding.
class LogBellman {
 public:
  LogBellman(const FiniteMDP& m, double beta, double gamma, Truncation trunc)
      : m_(m), beta_(beta), gamma_(gamma) {
    n_ = m.n_states;
    offset_.reserve(n_ + 1);
    offset_.push_back(0);
    for (std::size_t x = 0; x < n_; ++x) {
      for (std::size_t s = 0; s < m.n_actions(x); ++s) {
        const auto row = m.row(x, s);
        for (std::size_t y = 0; y < n_; ++y) {
          if (row[y] > 0.0) {
            support_.push_back(static_cast<std::uint32_t>(y));
            prob_.push_back(row[y]);
            logprob_.push_back(std::log(row[y]));
          }
        }
        row_end_.push_back(support_.size());
        stage_cost_.push_back(gamma * trunc.apply(m.cost[x][s]));
      }
      offset_.push_back(row_end_.size());
    }
    scaled_.resize(n_);
    expo_.resize(n_);
  }

  /// out = T(w); policy (if non-null) receives the argmin slots.
  void apply(std::span<const double> w, std::span<double> out,
             std::vector<std::size_t>* policy) {
    double top = -kInfinity;
    for (std::size_t y = 0; y < n_; ++y) {
      scaled_[y] = beta_ * w[y];
      top = std::max(top, scaled_[y]);
    }
    for (std::size_t y = 0; y < n_; ++y) expo_[y] = std::exp(scaled_[y] - top);

    for (std::size_t x = 0; x < n_; ++x) {
      ArgminTracker best;
      for (std::size_t pair = offset_[x]; pair < offset_[x + 1]; ++pair) {
        const double v = stage_cost_[pair] + row_log_mgf(pair);
        const std::size_t slot = pair - offset_[x];
        best.offer(v, slot, m_.actions[x][slot]);
      }
      out[x] = best.best;
      if (policy) (*policy)[x] = best.slot;
    }
  }

  double stage_cost(std::size_t x, std::size_t slot) const { return stage_cost_[offset_[x] + slot]; }

 private:
  double row_log_mgf(std::size_t pair) const {
    const std::size_t begin = pair == 0 ? 0 : row_end_[pair - 1];
    const std::size_t end = row_end_[pair];
    std::size_t lead = begin;
    for (std::size_t i = begin + 1; i < end; ++i)
      if (scaled_[support_[i]] > scaled_[support_[lead]]) lead = i;
    const double lead_exp = expo_[support_[lead]];
    if (lead_exp < 1e-290) return slow_row_log_mgf(begin, end, lead);
    double tail = 0.0;
    for (std::size_t i = begin; i < end; ++i)
      if (i != lead) tail += prob_[i] * expo_[support_[i]];
    return scaled_[support_[lead]] + logprob_[lead] + std::log1p(tail / (prob_[lead] * lead_exp));
  }

  double slow_row_log_mgf(std::size_t begin, std::size_t end, std::size_t lead) const {
    const double shift = scaled_[support_[lead]];
    double tail = 0.0;
    for (std::size_t i = begin; i < end; ++i)
      if (i != lead) tail += prob_[i] * std::exp(scaled_[support_[i]] - shift);
    return shift + logprob_[lead] + std::log1p(tail / prob_[lead]);
  }

  const FiniteMDP& m_;
  double beta_;
  double gamma_;
  std::size_t n_ = 0;
  std::vector<std::size_t> offset_;   // state -> first pair
  std::vector<std::size_t> row_end_;  // pair -> end of its support run
  std::vector<std::uint32_t> support_;
  std::vector<double> prob_;
  std::vector<double> logprob_;
  std::vector<double> stage_cost_;
  std::vector<double> scaled_;
  std::vector<double> expo_;
};

inline std::size_t iteration_cap(double beta, double gamma, double range, double tol) {
  const double w0 = gamma * range / (1.0 - beta);
  if (!(w0 > tol * (1.0 - beta))) return 64;
  const double k = std::ceil(std::log(tol * (1.0 - beta) / w0) / std::log(beta));
  return static_cast<std::size_t>(k) + 64;
}

}  // namespace detail

/// One application of the log-form Bellman operator, with the argmin selector
/// (ties within 1e-12 relative go to the lowest action label).
inline std::pair<std::vector<double>, StationaryPolicy> bellman_apply(std::span<const double> w,
                                                                      const FiniteMDP& m,
                                                                      double beta, double gamma,
                                                                      Truncation trunc) {
  detail::check_discount(beta, gamma);
  if (w.size() != m.n_states) throw DomainError("bellman_apply: value vector has wrong size");
  for (double v : w)
    if (!std::isfinite(v)) throw DomainError("bellman_apply: value vector must be finite");
  detail::LogBellman op(m, beta, gamma, trunc);
  std::vector<double> out(m.n_states);
  StationaryPolicy f;
  f.choice.resize(m.n_states);
  op.apply(w, out, &f.choice);
  return {std::move(out), std::move(f)};
}

/// Value iteration from w = 0, stopped when (beta/(1-beta)) ||w_k - w_{k-1}|| <= tol.
/// Throws ConvergenceError past ceil(log(tol(1-beta)/W0)/log beta) + 64 sweeps,
/// W0 = gamma N / (1-beta).
inline DiscountedSolution solve_discounted(const FiniteMDP& m, double beta, double gamma,
                                           Truncation trunc, double tol) {
  detail::check_discount(beta, gamma);
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  require_valid(m);

  const double range = trunc.active() ? static_cast<double>(trunc.level()) : m.max_cost();
  const std::size_t cap = detail::iteration_cap(beta, gamma, range, tol);
  const double factor = beta / (1.0 - beta);

  detail::LogBellman op(m, beta, gamma, trunc);
  std::vector<double> w(m.n_states, 0.0), next(m.n_states);
  StationaryPolicy f;
  f.choice.assign(m.n_states, 0);

  double best = kInfinity;
  std::size_t since_best = 0;
  for (std::size_t k = 1; k <= cap; ++k) {
    op.apply(w, next, &f.choice);
    double step = 0.0;
    for (std::size_t x = 0; x < m.n_states; ++x) step = std::max(step, std::abs(next[x] - w[x]));
    w.swap(next);
    const double bound = factor * step;
    if (bound < best) {
      best = bound;
      since_best = 0;
    } else if (++since_best > kStallLimit) {
      // Exact steps shrink every sweep; a long plateau means rounding noise.
      throw ConvergenceError("solve_discounted: stalled at rounding level before reaching tolerance",
                             best);
    }
    if (bound <= tol) {
      DiscountedSolution sol;
      sol.value = {std::move(w), beta, gamma, trunc};
      sol.policy = std::move(f);
      sol.iterations = k;
      sol.residual = bound;
      sol.ill_conditioned = (1.0 - beta) < kIllConditionedGap;
      return sol;
    }
  }
  throw ConvergenceError("solve_discounted: iteration cap of " + std::to_string(cap) +
                             " exceeded (tolerance too tight for this discount factor?)",
                         best);
}

/// The untruncated equation. For finite costs c^N = c as soon as N >= max c,
/// so this is the truncated solve with the truncation switched off.
inline DiscountedSolution solve_untruncated(const FiniteMDP& m, double beta, double gamma,
                                            double tol) {
  return solve_discounted(m, beta, gamma, Truncation::none(), tol);
}

/// Solves for each level in Ns (strictly increasing, all >= 1).
inline std::vector<DiscountedSolution> truncation_sweep(const FiniteMDP& m, double beta,
                                                        double gamma,
                                                        std::span<const std::int64_t> levels,
                                                        double tol) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) throw DomainError("truncation_sweep: levels must be positive");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw DomainError("truncation_sweep: levels must be strictly increasing");
  }
  std::vector<DiscountedSolution> out;
  out.reserve(levels.size());
  for (auto n : levels) out.push_back(solve_discounted(m, beta, gamma, Truncation::at(n), tol));
  return out;
}

}  // namespace rsmdp
