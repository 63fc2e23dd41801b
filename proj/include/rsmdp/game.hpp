#pragma once

// Entropy-penalized minimax game: at (x, a) the opponent picks the next-state
// law p(.|x,a) and the controller pays gamma c(x,a) - R(p(.|x,a) || q(.|x,a)).
// Opponents are stationary kernels. The tilted kernel
//
//   p0(.|x,a) = q(.|x,a) e^{beta w} / sum_y q(y|x,a) e^{beta w(y)}
//
// built from the discounted log-value w is the opponent's best response and
// makes the game value coincide with w.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "rsmdp/entropy.hpp"
#include "rsmdp/errors.hpp"
#include "rsmdp/model.hpp"

namespace rsmdp {

/// p[x][slot] is a distribution over next states, aligned with model.kernel.
struct OpponentKernel {
  std::vector<std::vector<std::vector<double>>> p;

  std::span<const double> row(std::size_t x, std::size_t slot) const { return p[x][slot]; }
};

inline OpponentKernel nominal_opponent(const FiniteMDP& m) { return {m.kernel}; }

inline void require_compatible(const FiniteMDP& m, const OpponentKernel& k) {
  if (k.p.size() != m.n_states) throw DomainError("opponent kernel: wrong number of states");
  for (std::size_t x = 0; x < m.n_states; ++x) {
    if (k.p[x].size() != m.n_actions(x))
      throw DomainError("opponent kernel: rows not aligned with A(x)");
    for (const auto& row : k.p[x]) {
      if (row.size() != m.n_states) throw DomainError("opponent kernel: row has wrong length");
      if (!is_prob_vector(row)) throw DomainError("opponent kernel: row is not a distribution");
    }
  }
}

struct AdmissibilityCertificate {
  bool admissible = false;
  double C = 0.0;
  // Offending (state, slot) when inadmissible.
  std::optional<std::pair<std::size_t, std::size_t>> witness;
};

namespace detail {

/// Pairs (x, slot) that a policy ever uses; every state is a possible start.
inline std::vector<std::vector<bool>> policy_support(const FiniteMDP& m,
                                                     const RandomizedMarkovPolicy& pi) {
  std::vector<std::vector<bool>> used(m.n_states);
  for (std::size_t x = 0; x < m.n_states; ++x) used[x].assign(m.n_actions(x), false);
  for (const auto& stage : pi.prob)
    for (std::size_t x = 0; x < m.n_states; ++x)
      for (std::size_t s = 0; s < m.n_actions(x); ++s)
        if (stage[x][s] > 0.0) used[x][s] = true;
  return used;
}

inline std::vector<std::vector<bool>> policy_support(const FiniteMDP& m, const StationaryPolicy& f) {
  std::vector<std::vector<bool>> used(m.n_states);
  for (std::size_t x = 0; x < m.n_states; ++x) {
    used[x].assign(m.n_actions(x), false);
    used[x][f.choice[x]] = true;
  }
  return used;
}

inline AdmissibilityCertificate certify(const FiniteMDP& m, const OpponentKernel& k, double gamma,
                                        const std::vector<std::vector<bool>>& used) {
  AdmissibilityCertificate cert;
  cert.admissible = true;
  for (std::size_t x = 0; x < m.n_states; ++x) {
    for (std::size_t s = 0; s < m.n_actions(x); ++s) {
      if (!used[x][s]) continue;
      const double r = relative_entropy(k.row(x, s), m.row(x, s));
      if (std::isinf(r)) {
        cert.admissible = false;
        cert.C = kInfinity;
        cert.witness = std::make_pair(x, s);
        return cert;
      }
      cert.C = std::max(cert.C, r - gamma * m.cost[x][s]);
    }
  }
  return cert;
}

}  // namespace detail

/// Finite relative entropy on every pair the policy uses, and the constant
/// C = max(0, max over those pairs of [R(p||q) - gamma c]).
inline AdmissibilityCertificate admissibility_check(const FiniteMDP& m, const StationaryPolicy& f,
                                                    const OpponentKernel& k, double gamma) {
  require_valid(m, f);
  require_compatible(m, k);
  return detail::certify(m, k, gamma, detail::policy_support(m, f));
}

inline AdmissibilityCertificate admissibility_check(const FiniteMDP& m,
                                                    const RandomizedMarkovPolicy& pi,
                                                    const OpponentKernel& k, double gamma) {
  require_valid(m, pi);
  require_compatible(m, k);
  return detail::certify(m, k, gamma, detail::policy_support(m, pi));
}

/// Best-response opponent p0(.|x,a) = tilt(beta w, q(.|x,a)) on every pair.
inline OpponentKernel opponent_tilt(const FiniteMDP& m, std::span<const double> w, double beta) {
  if (w.size() != m.n_states) throw DomainError("opponent_tilt: w has wrong size");
  std::vector<double> scaled(w.size());
  for (std::size_t y = 0; y < w.size(); ++y) {
    if (!std::isfinite(w[y])) throw DomainError("opponent_tilt: w must be finite");
    scaled[y] = beta * w[y];
  }
  OpponentKernel k;
  k.p.resize(m.n_states);
  for (std::size_t x = 0; x < m.n_states; ++x) {
    k.p[x].reserve(m.n_actions(x));
    for (std::size_t s = 0; s < m.n_actions(x); ++s) k.p[x].push_back(tilt(scaled, m.row(x, s)));
  }
  return k;
}

/// Opponent obtained by tilting each q(.|x,a) with an independent uniform
/// vector in [-radius, radius]^n. Finite entropy by construction.
template <class Rng>
OpponentKernel random_tilted_opponent(const FiniteMDP& m, Rng& rng, double radius = 5.0) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> v(m.n_states);
  OpponentKernel k;
  k.p.resize(m.n_states);
  for (std::size_t x = 0; x < m.n_states; ++x) {
    for (std::size_t s = 0; s < m.n_actions(x); ++s) {
      for (double& e : v) e = u(rng);
      k.p[x].push_back(tilt(v, m.row(x, s)));
    }
  }
  return k;
}

struct EntropyBoundReport {
  bool holds = true;
  double bound = 0.0;        // 2 (beta N gamma/(1-beta)) exp(beta N gamma/(1-beta))
  double max_entropy = 0.0;  // max over (x,a) of R(p0 || q)
  double max_ratio = 0.0;    // max_entropy / bound
};

/// Checks R(p0(.|x,a) || q(.|x,a)) <= 2 (beta N gamma/(1-beta)) exp(beta N gamma/(1-beta))
/// for the tilt of a truncated solution w (which must satisfy 0 <= (1-beta) w <= N gamma).
inline EntropyBoundReport entropy_bound_check(const FiniteMDP& m, std::span<const double> w,
                                              double beta, double gamma, std::int64_t level) {
  if (level < 1) throw DomainError("entropy_bound_check: N must be positive");
  constexpr double kSlack = 1e-10;
  for (double v : w) {
    const double s = (1.0 - beta) * v;
    if (!(s >= -kSlack && s <= static_cast<double>(level) * gamma + kSlack))
      throw DomainError("entropy_bound_check: w violates 0 <= (1-beta) w <= N gamma");
  }
  const auto k = opponent_tilt(m, w, beta);
  const double a = beta * static_cast<double>(level) * gamma / (1.0 - beta);
  EntropyBoundReport rep;
  rep.bound = 2.0 * a * std::exp(a);
  for (std::size_t x = 0; x < m.n_states; ++x) {
    for (std::size_t s = 0; s < m.n_actions(x); ++s) {
      const double r = relative_entropy(k.row(x, s), m.row(x, s));
      rep.max_entropy = std::max(rep.max_entropy, r);
      if (r > rep.bound) rep.holds = false;
    }
  }
  rep.max_ratio = rep.max_entropy / rep.bound;
  return rep;
}

/// J_n(x) = log E_x exp(gamma sum_{k<n} c(x_k, a_k)) under a randomized Markov
/// policy, by the backward recursion
///   U_k(x) = log sum_a pi_k(a|x) exp(gamma c(x,a) + log_mgf(U_{k+1}, q(.|x,a))),  U_n = 0.
inline std::vector<double> log_mgf_horizon(const FiniteMDP& m, const RandomizedMarkovPolicy& pi,
                                           double gamma, std::size_t n) {
  if (n < 1) throw DomainError("log_mgf_horizon: horizon must be at least 1");
  if (pi.horizon() < n) throw DomainError("log_mgf_horizon: policy shorter than the horizon");
  require_valid(m);
  require_valid(m, pi);
  std::vector<double> u(m.n_states, 0.0), next(m.n_states), per_action;
  for (std::size_t k = n; k-- > 0;) {
    for (std::size_t x = 0; x < m.n_states; ++x) {
      per_action.resize(m.n_actions(x));
      for (std::size_t s = 0; s < m.n_actions(x); ++s)
        per_action[s] = gamma * m.cost[x][s] + log_mgf(u, m.row(x, s));
      next[x] = log_mgf(per_action, pi.prob[k][x]);
    }
    u.swap(next);
  }
  return u;
}

inline std::vector<double> log_mgf_horizon(const FiniteMDP& m, const StationaryPolicy& f,
                                           double gamma, std::size_t n) {
  require_valid(m, f);
  return log_mgf_horizon(m, RandomizedMarkovPolicy::from_stationary(m, f, n), gamma, n);
}

/// j_n(x) = sum_{k<n} E_x[gamma c(x_k,a_k) - R(p(.|x_k,a_k) || q(.|x_k,a_k))] with the
/// state moving under p. Computed by exact forward propagation of the
/// state-action occupation measure from every starting state.
inline std::vector<double> game_cost_finite(const FiniteMDP& m, const RandomizedMarkovPolicy& pi,
                                            const OpponentKernel& k, double gamma, std::size_t n) {
  if (n < 1) throw DomainError("game_cost_finite: horizon must be at least 1");
  if (pi.horizon() < n) throw DomainError("game_cost_finite: policy shorter than the horizon");
  const auto cert = admissibility_check(m, pi, k, gamma);
  if (!cert.admissible) throw InadmissibleError("game_cost_finite: opponent is not admissible");

  const std::size_t ns = m.n_states;
  // Per-pair payoff; only pairs in the policy's support are ever weighted.
  std::vector<std::vector<double>> payoff(ns);
  for (std::size_t x = 0; x < ns; ++x) {
    payoff[x].resize(m.n_actions(x), 0.0);
    for (std::size_t s = 0; s < m.n_actions(x); ++s) {
      const double r = relative_entropy(k.row(x, s), m.row(x, s));
      payoff[x][s] = std::isinf(r) ? 0.0 : gamma * m.cost[x][s] - r;
    }
  }

  std::vector<double> total(ns, 0.0);
  std::vector<double> dist(ns), next(ns);
  for (std::size_t start = 0; start < ns; ++start) {
    std::fill(dist.begin(), dist.end(), 0.0);
    dist[start] = 1.0;
    for (std::size_t stage = 0; stage < n; ++stage) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t x = 0; x < ns; ++x) {
        if (dist[x] == 0.0) continue;
        for (std::size_t s = 0; s < m.n_actions(x); ++s) {
          const double occ = dist[x] * pi.prob[stage][x][s];
          if (occ == 0.0) continue;
          total[start] += occ * payoff[x][s];
          const auto row = k.row(x, s);
          for (std::size_t y = 0; y < ns; ++y) next[y] += occ * row[y];
        }
      }
      dist.swap(next);
    }
  }
  return total;
}

inline std::vector<double> game_cost_finite(const FiniteMDP& m, const StationaryPolicy& f,
                                            const OpponentKernel& k, double gamma, std::size_t n) {
  require_valid(m, f);
  return game_cost_finite(m, RandomizedMarkovPolicy::from_stationary(m, f, n), k, gamma, n);
}

/// V_beta(x, f, p) = sum_k beta^k E_x[gamma c - R(p||q)], cut after the first K with
/// beta^{K+1} (gamma max c + C) / (1 - beta) <= tol.
inline std::vector<double> discounted_game_cost(const FiniteMDP& m, const StationaryPolicy& f,
                                                const OpponentKernel& k, double beta,
                                                double gamma, double tol) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("discounted_game_cost: beta outside (0,1)");
  if (!(tol > 0.0)) throw DomainError("discounted_game_cost: tolerance must be positive");
  const auto cert = admissibility_check(m, f, k, gamma);
  if (!cert.admissible) throw InadmissibleError("discounted_game_cost: opponent is not admissible");

  const std::size_t ns = m.n_states;
  std::vector<double> r(ns);
  double max_cost = 0.0;
  for (std::size_t x = 0; x < ns; ++x) {
    const std::size_t s = f.choice[x];
    r[x] = gamma * m.cost[x][s] - relative_entropy(k.row(x, s), m.row(x, s));
    max_cost = std::max(max_cost, m.cost[x][s]);
  }
  const double scale = (gamma * max_cost + cert.C) / (1.0 - beta);
  std::size_t terms = 1;  // K + 1
  for (double tail = beta * scale; tail > tol; tail *= beta) ++terms;

  // Horner form of sum_{k<terms} beta^k P^k r.
  std::vector<double> v = r, next(ns);
  for (std::size_t i = 1; i < terms; ++i) {
    for (std::size_t x = 0; x < ns; ++x) {
      const auto row = k.row(x, f.choice[x]);
      double acc = 0.0;
      for (std::size_t y = 0; y < ns; ++y) acc += row[y] * v[y];
      next[x] = r[x] + beta * acc;
    }
    v.swap(next);
  }
  return v;
}

}  // namespace rsmdp
