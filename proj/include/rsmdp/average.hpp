#pragma once

// Average-cost quantities as beta -> 1 limits of discounted ones:
//
//   l  = lim (1 - beta) m_beta,          m_beta = min_x V_beta(x)
//   h  = liminf (V_beta - m_beta)
//
// and the optimality inequality
//
//   h(x) + l >= min_a [ gamma c(x,a) + log sum_y q(y|x,a) e^{h(y)} ].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsmdp/bellman.hpp"
#include "rsmdp/entropy.hpp"
#include "rsmdp/errors.hpp"
#include "rsmdp/model.hpp"

namespace rsmdp {

/// beta_k = 1 - 2^{-k} (1 - start), k = 0..count-1.
inline std::vector<double> geometric_beta_grid(double start = 0.9, int count = 13) {
  if (!(start > 0.0 && start < 1.0)) throw DomainError("beta grid: start must lie in (0,1)");
  if (count < 1) throw DomainError("beta grid: count must be positive");
  std::vector<double> betas;
  betas.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) betas.push_back(1.0 - std::ldexp(1.0 - start, -k));
  return betas;
}

struct SweepEntry {
  double beta = 0.0;
  bool ok = false;
  std::string error;           // set when the solve failed
  LogValueFunction value;      // V_beta
  double m_beta = 0.0;         // min_x V_beta(x)
  std::vector<double> h_beta;  // V_beta - m_beta
  StationaryPolicy policy;     // f_beta
  double scaled = 0.0;         // (1 - beta) m_beta
  double residual = 0.0;
  std::size_t iterations = 0;
};

struct DiscountSweepResult {
  double gamma = 0.0;
  std::vector<SweepEntry> entries;

  std::vector<const SweepEntry*> successful() const {
    std::vector<const SweepEntry*> out;
    for (const auto& e : entries)
      if (e.ok) out.push_back(&e);
    return out;
  }
};

inline SweepEntry make_sweep_entry(DiscountedSolution sol) {
  SweepEntry e;
  e.beta = sol.value.beta;
  e.ok = true;
  e.m_beta = *std::min_element(sol.value.values.begin(), sol.value.values.end());
  e.h_beta.reserve(sol.value.values.size());
  for (double v : sol.value.values) e.h_beta.push_back(v - e.m_beta);
  e.scaled = (1.0 - e.beta) * e.m_beta;
  e.policy = std::move(sol.policy);
  e.residual = sol.residual;
  e.iterations = sol.iterations;
  e.value = std::move(sol.value);
  return e;
}

/// Solves the untruncated discounted equation for each beta. A beta whose solve
/// runs out of iterations is kept as a failed entry; the sweep continues.
inline DiscountSweepResult discount_sweep(const FiniteMDP& m, double gamma,
                                          std::span<const double> betas, double tol) {
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw DomainError("discount_sweep: beta outside (0,1)");
    if (i > 0 && betas[i] <= betas[i - 1])
      throw DomainError("discount_sweep: betas must be strictly increasing");
  }
  DiscountSweepResult r;
  r.gamma = gamma;
  for (double beta : betas) {
    try {
      r.entries.push_back(make_sweep_entry(solve_untruncated(m, beta, gamma, tol)));
    } catch (const ConvergenceError& e) {
      SweepEntry failed;
      failed.beta = beta;
      failed.error = e.what();
      failed.residual = e.best_residual();
      r.entries.push_back(std::move(failed));
    }
  }
  return r;
}

struct AverageConstantEstimate {
  double l_hat = 0.0;
  double diagnostic = 0.0;  // max pairwise spread of (1-beta) m_beta over the last 3 entries
};

/// (1 - beta) m_beta at the largest successful beta, with a Cauchy-type spread.
inline AverageConstantEstimate estimate_average_constant(const DiscountSweepResult& sweep) {
  const auto ok = sweep.successful();
  if (ok.size() < 3) throw DomainError("estimate_average_constant: need at least 3 solved betas");
  AverageConstantEstimate est;
  est.l_hat = ok.back()->scaled;
  for (std::size_t i = ok.size() - 3; i < ok.size(); ++i)
    for (std::size_t j = i + 1; j < ok.size(); ++j)
      est.diagnostic = std::max(est.diagnostic, std::abs(ok[i]->scaled - ok[j]->scaled));
  return est;
}

/// Elementwise minimum of h_beta over the last `tail` successful entries,
/// shifted so that its minimum is 0.
inline std::vector<double> relative_value(const DiscountSweepResult& sweep, std::size_t tail) {
  const auto ok = sweep.successful();
  if (tail < 1 || tail > ok.size())
    throw DomainError("relative_value: tail must be between 1 and the number of solved betas");
  std::vector<double> h = ok.back()->h_beta;
  for (std::size_t i = ok.size() - tail; i + 1 < ok.size(); ++i)
    for (std::size_t x = 0; x < h.size(); ++x) h[x] = std::min(h[x], ok[i]->h_beta[x]);
  const double lo = *std::min_element(h.begin(), h.end());
  for (double& v : h) v -= lo;
  return h;
}

struct OptimalityResidual {
  std::vector<double> inequality;  // h + l - min_a[...]; >= 0 when the inequality holds
  std::vector<double> equation;    // |h + l - min_a[...]|
  StationaryPolicy policy;         // argmin selector
};

/// Residuals of h(x) + l >= min_a [gamma c + log_mgf(h, q(.|x,a))].
///
/// The log-MGF is kept in pieces so that h(x) and the row's largest h, and
/// gamma c and the lead log-probability, cancel before the small log1p tail is
/// subtracted. This keeps the sign of residuals far below the scale of h.
inline OptimalityResidual optimality_residual(const FiniteMDP& m, double gamma,
                                              std::span<const double> h, double l_hat) {
  require_valid(m);
  if (h.size() != m.n_states) throw DomainError("optimality_residual: h has wrong size");
  for (double v : h)
    if (!std::isfinite(v)) throw DomainError("optimality_residual: h must be finite");

  OptimalityResidual r;
  r.inequality.resize(m.n_states);
  r.equation.resize(m.n_states);
  r.policy.choice.resize(m.n_states);
  for (std::size_t x = 0; x < m.n_states; ++x) {
    detail::ArgminTracker best;
    double res = -kInfinity;
    for (std::size_t s = 0; s < m.n_actions(x); ++s) {
      const double gc = gamma * m.cost[x][s];
      const auto parts = log_mgf_parts(h, m.row(x, s));
      best.offer(gc + parts.value(), s, m.actions[x][s]);
      const double head = (h[x] - parts.shift) + l_hat;
      const double mid = -gc - parts.log_lead;
      res = std::max(res, head + mid - parts.log1p_tail);
    }
    r.inequality[x] = res;
    r.equation[x] = std::abs(res);
    r.policy.choice[x] = best.slot;
  }
  return r;
}

struct PolicyRisk {
  std::size_t horizon = 0;
  std::vector<double> log_mgf;    // J_n(x) = log E_x exp(gamma sum_{k<n} c)
  std::vector<double> growth;     // (J_n - J_{n-1}) / gamma
  double deviation = 0.0;         // max drift of the growth estimate over the last 10 steps
};

namespace detail {

/// Incremental backward recursion u_{k+1}(x) = gamma c(x,f(x)) + log_mgf(u_k, q(.|x,f(x))).
class RiskRecursion {
 public:
  static constexpr std::size_t kWindow = 10;

  RiskRecursion(const FiniteMDP& m, const StationaryPolicy& f, double gamma)
      : m_(m), f_(f), gamma_(gamma), u_(m.n_states, 0.0), next_(m.n_states) {}

  void advance_to(std::size_t n) {
    while (steps_ < n) {
      for (std::size_t x = 0; x < m_.n_states; ++x) {
        const std::size_t s = f_.choice[x];
        next_[x] = gamma_ * m_.cost[x][s] + log_mgf(u_, m_.row(x, s));
      }
      diffs_.push_back({});
      auto& d = diffs_.back();
      d.resize(m_.n_states);
      for (std::size_t x = 0; x < m_.n_states; ++x) d[x] = (next_[x] - u_[x]) / gamma_;
      if (diffs_.size() > kWindow) diffs_.erase(diffs_.begin());
      u_.swap(next_);
      ++steps_;
    }
  }

  PolicyRisk snapshot() const {
    PolicyRisk r;
    r.horizon = steps_;
    r.log_mgf = u_;
    r.growth = diffs_.back();
    for (const auto& d : diffs_)
      for (std::size_t x = 0; x < d.size(); ++x)
        r.deviation = std::max(r.deviation, std::abs(d[x] - r.growth[x]));
    return r;
  }

 private:
  const FiniteMDP& m_;
  const StationaryPolicy& f_;
  double gamma_;
  std::vector<double> u_, next_;
  std::vector<std::vector<double>> diffs_;
  std::size_t steps_ = 0;
};

}  // namespace detail

/// Exact n-step log-MGF of the cumulative cost under f, plus the one-step
/// growth estimate (J_n - J_{n-1})/gamma.
inline PolicyRisk evaluate_policy_risk(const FiniteMDP& m, const StationaryPolicy& f,
                                       double gamma, std::size_t horizon) {
  if (horizon < 1) throw DomainError("evaluate_policy_risk: horizon must be at least 1");
  if (!(gamma > 0.0)) throw DomainError("evaluate_policy_risk: gamma must be positive");
  require_valid(m);
  require_valid(m, f);
  detail::RiskRecursion rec(m, f, gamma);
  rec.advance_to(horizon);
  return rec.snapshot();
}

inline constexpr std::size_t kMaxGrowthHorizon = std::size_t{1} << 16;

/// Growth rate of f by horizon doubling (16, 32, ..., 2^16) until the last
/// 10 one-step estimates agree within tol. The returned deviation tells
/// whether that happened.
inline PolicyRisk growth_rate(const FiniteMDP& m, const StationaryPolicy& f, double gamma,
                              double tol) {
  if (!(gamma > 0.0)) throw DomainError("growth_rate: gamma must be positive");
  require_valid(m);
  require_valid(m, f);
  detail::RiskRecursion rec(m, f, gamma);
  PolicyRisk r;
  for (std::size_t n = 16; n <= kMaxGrowthHorizon; n *= 2) {
    rec.advance_to(n);
    r = rec.snapshot();
    if (r.deviation <= tol) break;
  }
  return r;
}

struct AverageSolution {
  double l_hat = 0.0;
  double l_hat_diagnostic = 0.0;
  std::vector<double> h;
  StationaryPolicy policy;  // f-hat
  std::vector<double> inequality_residual;
  std::vector<double> equation_residual;
  DiscountSweepResult sweep;
};

inline constexpr std::size_t kDefaultTail = 4;

/// Sweep, l-hat, tail-min h, and the optimality-inequality residuals with f-hat.
inline AverageSolution solve_average(const FiniteMDP& m, double gamma,
                                     std::span<const double> betas, double tol,
                                     std::size_t tail = kDefaultTail) {
  AverageSolution a;
  a.sweep = discount_sweep(m, gamma, betas, tol);
  const auto est = estimate_average_constant(a.sweep);
  a.l_hat = est.l_hat;
  a.l_hat_diagnostic = est.diagnostic;
  a.h = relative_value(a.sweep, std::min(tail, a.sweep.successful().size()));
  auto res = optimality_residual(m, gamma, a.h, a.l_hat);
  a.policy = std::move(res.policy);
  a.inequality_residual = std::move(res.inequality);
  a.equation_residual = std::move(res.equation);
  return a;
}

}  // namespace rsmdp
