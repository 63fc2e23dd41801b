#pragma once

// Diagnostics for the uniform boundedness of h_beta = V_beta - m_beta in beta.
//
// With D = {x : V_beta(x) <= m_beta + eta} and tau the first entry time into D,
//
//   h_beta(x) <= eta + inf_pi log E_x^pi exp(gamma sum_{k<tau} c(x_k, a_k)).
//
// For a stationary f the expectation z(x) solves the linear system
//
//   z(x) = e^{gamma c(x,f(x))} [ sum_{y not in D} q(y|x,f(x)) z(y) + q(D|x,f(x)) ],  x not in D,
//
// which has a finite nonnegative solution from x exactly when every strongly
// connected block of M(x,y) = e^{gamma c(x,f(x))} q(y|x,f(x)) reachable from x
// has spectral radius below 1.

#include <Eigen/Dense>

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
#include "rsmdp/bellman.hpp"
#include "rsmdp/entropy.hpp"
#include "rsmdp/errors.hpp"
#include "rsmdp/model.hpp"

namespace rsmdp {

inline constexpr double kStoppingSlack = 1e-12;
inline constexpr double kDivergenceGap = 1e-10;
inline constexpr double kDominationSlack = 1e-8;
inline constexpr std::uint64_t kExhaustivePolicyLimit = 4096;
inline constexpr std::size_t kSampledPolicies = 256;

/// Membership mask of D = {x : V(x) <= m_beta + eta (+1e-12)}.
inline std::vector<bool> stopping_set(std::span<const double> values, double m_beta, double eta) {
  if (!(eta >= 0.0)) throw DomainError("stopping_set: eta must be nonnegative");
  std::vector<bool> in(values.size());
  for (std::size_t x = 0; x < values.size(); ++x)
    in[x] = values[x] <= m_beta + eta + kStoppingSlack;
  return in;
}

struct HittingCostSolution {
  std::vector<double> u;         // log E_x exp(gamma sum_{k<tau_D} c); 0 on D, +inf where divergent
  bool finite = false;           // every state finite
  double spectral_estimate = 0;  // spectral radius of M on the complement of D
};

namespace detail {

inline constexpr std::size_t kPowerIterations = 100000;

/// Perron root of an irreducible nonnegative matrix by power iteration on
/// I + A, bracketed by Collatz-Wielandt bounds. Returns the upper bound.
inline double perron_root(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  if (n == 1) return a(0, 0);
  if (!a.allFinite()) return kInfinity;
  const Eigen::MatrixXd shifted = a + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  double upper = kInfinity;
  for (std::size_t it = 0; it < kPowerIterations; ++it) {
    const Eigen::VectorXd w = shifted * v;
    const Eigen::VectorXd ratio = w.cwiseQuotient(v);
    upper = ratio.maxCoeff();
    const double lower = ratio.minCoeff();
    if (upper - lower <= 1e-15 * upper) break;
    v = w / w.maxCoeff();
  }
  return upper - 1.0;
}

/// Strongly connected components of the support graph of a (square) matrix.
inline std::vector<int> components(const Eigen::MatrixXd& a) {
  const auto n = static_cast<std::size_t>(a.rows());
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (std::size_t j = 0; j < n; ++j)
      if (a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) reach[i][j] = true;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = true;
  std::vector<int> comp(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (comp[i] >= 0) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (reach[i][j] && reach[j][i]) comp[j] = next;
    ++next;
  }
  return comp;
}

}  // namespace detail

/// Exponential cost accrued before first entry into D under f.
inline HittingCostSolution hitting_exp_cost(const FiniteMDP& m, const StationaryPolicy& f,
                                            double gamma, const std::vector<bool>& in_d) {
  require_valid(m);
  require_valid(m, f);
  if (in_d.size() != m.n_states) throw DomainError("hitting_exp_cost: set has wrong size");
  if (std::none_of(in_d.begin(), in_d.end(), [](bool b) { return b; }))
    throw DomainError("hitting_exp_cost: stopping set must be nonempty");

  HittingCostSolution sol;
  sol.u.assign(m.n_states, 0.0);
  std::vector<std::size_t> outside;
  for (std::size_t x = 0; x < m.n_states; ++x)
    if (!in_d[x]) outside.push_back(x);
  if (outside.empty()) {
    sol.finite = true;
    return sol;
  }

  const auto k = static_cast<Eigen::Index>(outside.size());
  Eigen::MatrixXd mult(k, k);
  Eigen::VectorXd entry(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const std::size_t x = outside[static_cast<std::size_t>(i)];
    const double weight = std::exp(gamma * m.cost[x][f.choice[x]]);
    const auto row = m.row(x, f.choice[x]);
    double to_d = 0.0;
    for (std::size_t y = 0; y < m.n_states; ++y)
      if (in_d[y]) to_d += row[y];
    entry(i) = weight * to_d;
    for (Eigen::Index j = 0; j < k; ++j) mult(i, j) = weight * row[outside[static_cast<std::size_t>(j)]];
  }

  // Perron root per strongly connected block, then propagate divergence
  // backwards along reachability.
  const auto comp = detail::components(mult);
  const int n_comp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<double> root(static_cast<std::size_t>(n_comp), 0.0);
  for (int c = 0; c < n_comp; ++c) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < k; ++i)
      if (comp[static_cast<std::size_t>(i)] == c) members.push_back(i);
    const auto s = static_cast<Eigen::Index>(members.size());
    Eigen::MatrixXd block(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = 0; j < s; ++j)
        block(i, j) = mult(members[static_cast<std::size_t>(i)], members[static_cast<std::size_t>(j)]);
    root[static_cast<std::size_t>(c)] = detail::perron_root(block);
  }
  sol.spectral_estimate = *std::max_element(root.begin(), root.end());

  std::vector<bool> divergent(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i)
    divergent[static_cast<std::size_t>(i)] =
        !(root[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])] < 1.0 - kDivergenceGap);
  for (bool changed = true; changed;) {
    changed = false;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (divergent[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (mult(i, j) > 0.0 && divergent[static_cast<std::size_t>(j)]) {
          divergent[static_cast<std::size_t>(i)] = true;
          changed = true;
          break;
        }
      }
    }
  }

  // Finite states are closed under reachability, so their system stands alone.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < k; ++i)
    if (!divergent[static_cast<std::size_t>(i)]) keep.push_back(i);
  for (Eigen::Index i = 0; i < k; ++i)
    if (divergent[static_cast<std::size_t>(i)]) sol.u[outside[static_cast<std::size_t>(i)]] = kInfinity;
  if (!keep.empty()) {
    const auto s = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(s, s);
    Eigen::VectorXd rhs(s);
    for (Eigen::Index i = 0; i < s; ++i) {
      rhs(i) = entry(keep[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < s; ++j)
        lhs(i, j) -= mult(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
    }
    const Eigen::VectorXd z = lhs.partialPivLu().solve(rhs);
    for (Eigen::Index i = 0; i < s; ++i)
      sol.u[outside[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])]] =
          std::log(std::max(z(i), 1.0));
  }
  sol.finite = keep.size() == outside.size();
  return sol;
}

struct HittingBound {
  std::vector<double> bound;  // eta + min over candidates of the hitting log-cost
  std::vector<bool> in_d;
  bool exhaustive = false;    // every deterministic stationary policy was tried
};

/// Hitting-cost bound from an already solved V_beta (f_beta seeds sampling).
inline HittingBound hitting_bound(const FiniteMDP& m, double gamma, std::span<const double> values,
                                const StationaryPolicy& f_beta, double eta,
                                std::uint64_t seed = 0x5eed) {
  const double m_beta = *std::min_element(values.begin(), values.end());
  HittingBound b;
  b.in_d = stopping_set(values, m_beta, eta);
  std::mt19937_64 rng(seed);
  const auto candidates =
      candidate_policies(m, kExhaustivePolicyLimit, kSampledPolicies, rng, &f_beta);
  const auto count = policy_count(m);
  b.exhaustive = count && *count <= kExhaustivePolicyLimit;
  std::vector<double> best(m.n_states, kInfinity);
  for (const auto& f : candidates) {
    const auto hit = hitting_exp_cost(m, f, gamma, b.in_d);
    for (std::size_t x = 0; x < m.n_states; ++x) best[x] = std::min(best[x], hit.u[x]);
  }
  b.bound.resize(m.n_states);
  for (std::size_t x = 0; x < m.n_states; ++x) b.bound[x] = eta + best[x];
  return b;
}

/// Solves V_beta, builds D and returns eta + min_f log E_x^f exp(gamma sum_{k<tau} c).
/// Exhaustive over deterministic stationary policies up to 4096 of them;
/// otherwise f_beta plus 255 random ones (an upper proxy for the infimum).
inline HittingBound condition_b_bound(const FiniteMDP& m, double beta, double gamma, double eta,
                                     double tol = 1e-10) {
  if (!(eta >= 0.0)) throw DomainError("condition_b_bound: eta must be nonnegative");
  const auto sol = solve_untruncated(m, beta, gamma, tol);
  return hitting_bound(m, gamma, sol.value.values, sol.policy, eta);
}

enum class ConditionBVerdict { HoldsOnGrid, Diverging, Inconclusive };

inline const char* to_string(ConditionBVerdict v) {
  switch (v) {
    case ConditionBVerdict::HoldsOnGrid: return "holds-on-grid";
    case ConditionBVerdict::Diverging: return "diverging";
    case ConditionBVerdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct ConditionBReport {
  ConditionBVerdict verdict = ConditionBVerdict::Inconclusive;
  std::vector<double> betas;                // solved grid points
  std::vector<std::vector<double>> h;       // [beta][x]
  std::vector<std::vector<double>> bounds;  // [beta][x], per-beta hitting-cost bound
  std::vector<double> sup_h;                // max over the grid of h_beta(x)
  std::vector<bool> growing;                // last 4 values strictly increasing with increasing steps
  std::vector<double> hitting_bound;         // max over the grid of the per-beta bound
  bool dominated = true;                    // h_beta <= bound + 1e-8 wherever the bound is finite
  bool exhaustive = false;
  std::string note;
};

/// Bounds every solved h_beta of a sweep and classifies the trend.
inline ConditionBReport condition_b_from_sweep(const FiniteMDP& m, double gamma,
                                               const DiscountSweepResult& sweep, double eta) {
  if (!(eta >= 0.0)) throw DomainError("condition_b_scan: eta must be nonnegative");
  const auto ok = sweep.successful();
  const std::size_t n = m.n_states;

  ConditionBReport rep;
  rep.sup_h.assign(n, 0.0);
  rep.hitting_bound.assign(n, 0.0);
  rep.growing.assign(n, false);
  rep.exhaustive = true;
  for (const auto* e : ok) {
    const auto b = hitting_bound(m, gamma, e->value.values, e->policy, eta);
    rep.exhaustive = rep.exhaustive && b.exhaustive;
    rep.betas.push_back(e->beta);
    rep.h.push_back(e->h_beta);
    rep.bounds.push_back(b.bound);
    for (std::size_t x = 0; x < n; ++x) {
      rep.sup_h[x] = std::max(rep.sup_h[x], e->h_beta[x]);
      rep.hitting_bound[x] = std::max(rep.hitting_bound[x], b.bound[x]);
      if (std::isfinite(b.bound[x]) && e->h_beta[x] > b.bound[x] + kDominationSlack)
        rep.dominated = false;
    }
  }

  if (ok.size() >= 4) {
    const std::size_t last = ok.size() - 1;
    for (std::size_t x = 0; x < n; ++x) {
      const double d1 = ok[last - 2]->h_beta[x] - ok[last - 3]->h_beta[x];
      const double d2 = ok[last - 1]->h_beta[x] - ok[last - 2]->h_beta[x];
      const double d3 = ok[last]->h_beta[x] - ok[last - 1]->h_beta[x];
      rep.growing[x] = d1 > 0.0 && d2 > 0.0 && d3 > 0.0 && d1 < d2 && d2 < d3;
    }
  }

  double largest_finite = -kInfinity;
  for (double b : rep.hitting_bound)
    if (std::isfinite(b)) largest_finite = std::max(largest_finite, b);
  bool any_growing = false, diverging = false;
  for (std::size_t x = 0; x < n; ++x) {
    if (!rep.growing[x]) continue;
    any_growing = true;
    const double h_last = ok.back()->h_beta[x];
    if (!std::isfinite(largest_finite) || h_last > 10.0 * largest_finite) diverging = true;
  }

  if (ok.empty()) rep.verdict = ConditionBVerdict::Inconclusive;
  else if (rep.dominated && !any_growing) rep.verdict = ConditionBVerdict::HoldsOnGrid;
  else if (diverging) rep.verdict = ConditionBVerdict::Diverging;
  else rep.verdict = ConditionBVerdict::Inconclusive;

  std::ostringstream os;
  os.precision(17);
  os << "grid evidence only: " << ok.size() << " of " << sweep.entries.size() << " betas solved";
  if (!ok.empty()) os << ", beta in [" << ok.front()->beta << ", " << ok.back()->beta << "]";
  rep.note = os.str();
  return rep;
}

/// Sweeps beta, bounds every h_beta by the hitting-cost bound, and classifies the trend.
inline ConditionBReport condition_b_scan(const FiniteMDP& m, double gamma,
                                         std::span<const double> betas, double eta,
                                         double tol = 1e-10) {
  if (!(eta >= 0.0)) throw DomainError("condition_b_scan: eta must be nonnegative");
  return condition_b_from_sweep(m, gamma, discount_sweep(m, gamma, betas, tol), eta);
}

}  // namespace rsmdp
