#pragma once

// End-to-end check that (l-hat / gamma, f-hat) from the vanishing-discount
// sweep behave like the optimal risk-sensitive average cost and an optimal
// stationary policy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rsmdp/average.hpp"
#include "rsmdp/condition_b.hpp"
#include "rsmdp/model.hpp"

namespace rsmdp {

struct VerifyConfig {
  std::vector<double> betas = geometric_beta_grid();
  double solve_tol = 1e-10;  // discounted solves
  double tol = 1e-6;         // assertions
  double eta = 0.0;
  std::size_t tail = kDefaultTail;
  std::uint64_t seed = 0x5eed;
};

struct VerificationReport {
  AverageSolution average;
  double optimal_rate = 0.0;               // l_hat / gamma
  std::vector<double> f_hat_growth;        // growth rate of f-hat per state
  std::vector<double> best_growth;         // min over checked policies, per state
  std::size_t policies_checked = 0;
  bool exhaustive = false;
  bool inequality_ok = false;              // (a)
  bool growth_ok = false;                  // (b)
  bool lower_bound_ok = false;             // (c)
  bool f_hat_attains = false;              // f-hat growth equals best_growth within tol
  bool state_dependent_optimum = false;    // best_growth not constant across states
  ConditionBReport condition_b;
  std::vector<std::string> failures;

  bool passed() const { return inequality_ok && growth_ok && lower_bound_ok; }
};

inline VerificationReport verify_optimality(const FiniteMDP& m, double gamma,
                                            const VerifyConfig& cfg = {}) {
  require_valid(m);
  VerificationReport r;
  r.average = solve_average(m, gamma, cfg.betas, cfg.solve_tol, cfg.tail);
  r.optimal_rate = r.average.l_hat / gamma;
  r.condition_b = condition_b_from_sweep(m, gamma, r.average.sweep, cfg.eta);

  auto fail = [&](const std::string& msg) { r.failures.push_back(msg); };
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };

  r.inequality_ok = true;
  for (std::size_t x = 0; x < m.n_states; ++x) {
    if (r.average.inequality_residual[x] < -cfg.tol) {
      r.inequality_ok = false;
      fail("(a) optimality inequality violated at state " + std::to_string(x) + ": residual " +
           fmt(r.average.inequality_residual[x]));
    }
  }

  r.f_hat_growth = growth_rate(m, r.average.policy, gamma, cfg.tol).growth;
  r.growth_ok = true;
  for (std::size_t x = 0; x < m.n_states; ++x) {
    if (std::abs(r.f_hat_growth[x] - r.optimal_rate) > cfg.tol) {
      r.growth_ok = false;
      fail("(b) growth rate of f-hat at state " + std::to_string(x) + " is " +
           fmt(r.f_hat_growth[x]) + ", expected " + fmt(r.optimal_rate));
    }
  }

  std::mt19937_64 rng(cfg.seed);
  const auto candidates =
      candidate_policies(m, kExhaustivePolicyLimit, kSampledPolicies, rng, &r.average.policy);
  const auto count = policy_count(m);
  r.exhaustive = count && *count <= kExhaustivePolicyLimit;
  r.policies_checked = candidates.size();
  r.best_growth.assign(m.n_states, kInfinity);
  r.lower_bound_ok = true;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto g = growth_rate(m, candidates[i], gamma, cfg.tol).growth;
    for (std::size_t x = 0; x < m.n_states; ++x) {
      r.best_growth[x] = std::min(r.best_growth[x], g[x]);
      if (g[x] < r.optimal_rate - cfg.tol) {
        if (r.lower_bound_ok)
          fail("(c) policy #" + std::to_string(i) + " has growth " + fmt(g[x]) + " at state " +
               std::to_string(x) + ", below " + fmt(r.optimal_rate));
        r.lower_bound_ok = false;
      }
    }
  }

  r.f_hat_attains = true;
  for (std::size_t x = 0; x < m.n_states; ++x)
    if (std::abs(r.f_hat_growth[x] - r.best_growth[x]) > cfg.tol) r.f_hat_attains = false;
  const auto [lo, hi] = std::minmax_element(r.best_growth.begin(), r.best_growth.end());
  r.state_dependent_optimum = *hi - *lo > cfg.tol;
  if (r.condition_b.verdict != ConditionBVerdict::HoldsOnGrid)
    fail(std::string("Condition (B) verdict: ") + to_string(r.condition_b.verdict));
  if (r.state_dependent_optimum) fail("optimal growth rate depends on the initial state");
  return r;
}

}  // namespace rsmdp
