#pragma once

// Finite controlled Markov model: states 0..n-1, a ragged list of admissible
// action labels per state, a nonnegative one-step cost and a transition row for
// every admissible (state, action) pair.
//
// Per-state data (cost, kernel, policy choices) is addressed by *slot*, the
// position of an action inside actions[x]. Action labels only matter for
// tie-breaking and for reporting.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rsmdp/errors.hpp"

namespace rsmdp {

inline constexpr double kRowSumTolerance = 1e-12;

struct FiniteMDP {
  std::size_t n_states = 0;
  std::vector<std::vector<int>> actions;                 // A(x), labels
  std::vector<std::vector<double>> cost;                 // [x][slot]
  std::vector<std::vector<std::vector<double>>> kernel;  // [x][slot][y]
  std::string label;

  std::size_t n_actions(std::size_t x) const { return actions[x].size(); }

  std::span<const double> row(std::size_t x, std::size_t slot) const {
    return kernel[x][slot];
  }

  /// Number of admissible (state, action) pairs, |K|.
  std::size_t n_pairs() const {
    std::size_t k = 0;
    for (const auto& a : actions) k += a.size();
    return k;
  }

  double max_cost() const {
    double m = 0.0;
    for (const auto& cx : cost)
      for (double c : cx) m = std::max(m, c);
    return m;
  }

  bool operator==(const FiniteMDP&) const = default;
};

/// Deterministic stationary selector. choice[x] is a slot into actions[x].
struct StationaryPolicy {
  std::vector<std::size_t> choice;

  int action(const FiniteMDP& m, std::size_t x) const { return m.actions[x][choice[x]]; }
  bool operator==(const StationaryPolicy&) const = default;
};

/// Finite-horizon randomized Markov policy: prob[k][x][slot] is the
/// probability of taking slot at state x in stage k.
struct RandomizedMarkovPolicy {
  std::vector<std::vector<std::vector<double>>> prob;

  std::size_t horizon() const { return prob.size(); }

  static RandomizedMarkovPolicy from_stationary(const FiniteMDP& m, const StationaryPolicy& f,
                                                std::size_t horizon) {
    RandomizedMarkovPolicy p;
    p.prob.assign(horizon, {});
    for (auto& stage : p.prob) {
      stage.resize(m.n_states);
      for (std::size_t x = 0; x < m.n_states; ++x) {
        stage[x].assign(m.n_actions(x), 0.0);
        stage[x][f.choice[x]] = 1.0;
      }
    }
    return p;
  }
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string what;
  std::optional<std::size_t> state;
  std::optional<std::size_t> slot;

  std::string describe() const {
    std::ostringstream os;
    os << what;
    if (state) os << " at state " << *state;
    if (slot) os << ", action slot " << *slot;
    return os.str();
  }
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  std::string describe() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.describe() << '\n';
    return os.str();
  }
};

/// Lists every violated model invariant. Never throws.
inline ValidationReport validate_model(const FiniteMDP& m) {
  ValidationReport r;
  auto add = [&r](std::string what, std::optional<std::size_t> x = {},
                  std::optional<std::size_t> s = {}) {
    r.violations.push_back({std::move(what), x, s});
  };

  if (m.n_states == 0) add("model has no states");
  if (m.actions.size() != m.n_states) add("actions: expected one list per state");
  if (m.cost.size() != m.n_states) add("cost: expected one list per state");
  if (m.kernel.size() != m.n_states) add("kernel: expected one list per state");
  if (!r.ok()) return r;

  for (std::size_t x = 0; x < m.n_states; ++x) {
    const auto& ax = m.actions[x];
    if (ax.empty()) add("empty action set", x);
    std::set<int> seen;
    for (std::size_t s = 0; s < ax.size(); ++s) {
      if (ax[s] < 0) add("negative action index", x, s);
      if (!seen.insert(ax[s]).second) add("duplicate action index", x, s);
    }
    if (m.cost[x].size() != ax.size()) {
      add("cost list not aligned with actions", x);
    } else {
      for (std::size_t s = 0; s < ax.size(); ++s) {
        const double c = m.cost[x][s];
        if (!std::isfinite(c)) add("cost is not finite", x, s);
        else if (c < 0.0) add("cost is negative", x, s);
      }
    }
    if (m.kernel[x].size() != ax.size()) {
      add("kernel list not aligned with actions", x);
      continue;
    }
    for (std::size_t s = 0; s < ax.size(); ++s) {
      const auto& row = m.kernel[x][s];
      if (row.size() != m.n_states) {
        add("kernel row has wrong length", x, s);
        continue;
      }
      bool bad_entry = false;
      double sum = 0.0;
      for (double p : row) {
        if (!std::isfinite(p) || p < 0.0) bad_entry = true;
        sum += p;
      }
      if (bad_entry) add("kernel row has a negative or non-finite entry", x, s);
      else if (std::abs(sum - 1.0) > kRowSumTolerance) add("kernel row does not sum to 1", x, s);
    }
  }
  return r;
}

inline void require_valid(const FiniteMDP& m) {
  auto r = validate_model(m);
  if (!r.ok()) throw ValidationError("invalid model:\n" + r.describe());
}

inline bool is_valid_policy(const FiniteMDP& m, const StationaryPolicy& f) {
  if (f.choice.size() != m.n_states) return false;
  for (std::size_t x = 0; x < m.n_states; ++x)
    if (f.choice[x] >= m.n_actions(x)) return false;
  return true;
}

inline void require_valid(const FiniteMDP& m, const StationaryPolicy& f) {
  if (!is_valid_policy(m, f)) throw DomainError("policy does not match the model's action sets");
}

inline void require_valid(const FiniteMDP& m, const RandomizedMarkovPolicy& pi) {
  for (const auto& stage : pi.prob) {
    if (stage.size() != m.n_states) throw DomainError("randomized policy: wrong number of states");
    for (std::size_t x = 0; x < m.n_states; ++x) {
      if (stage[x].size() != m.n_actions(x))
        throw DomainError("randomized policy: distribution not aligned with A(x)");
      double sum = 0.0;
      for (double p : stage[x]) {
        if (!(p >= 0.0)) throw DomainError("randomized policy: negative probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance)
        throw DomainError("randomized policy: distribution does not sum to 1");
    }
  }
}

// ---------------------------------------------------------------------------
// Deterministic policy enumeration (mixed radix over the action sets)

/// Number of deterministic stationary policies, or nullopt past 2^63.
inline std::optional<std::uint64_t> policy_count(const FiniteMDP& m) {
  std::uint64_t n = 1;
  for (std::size_t x = 0; x < m.n_states; ++x) {
    const std::uint64_t k = m.n_actions(x);
    if (k != 0 && n > (std::numeric_limits<std::uint64_t>::max() >> 1) / k) return std::nullopt;
    n *= k;
  }
  return n;
}

inline StationaryPolicy policy_from_index(const FiniteMDP& m, std::uint64_t index) {
  StationaryPolicy f;
  f.choice.resize(m.n_states);
  for (std::size_t x = 0; x < m.n_states; ++x) {
    const std::uint64_t k = m.n_actions(x);
    f.choice[x] = static_cast<std::size_t>(index % k);
    index /= k;
  }
  return f;
}

template <class Rng>
StationaryPolicy random_policy(const FiniteMDP& m, Rng& rng) {
  StationaryPolicy f;
  f.choice.resize(m.n_states);
  for (std::size_t x = 0; x < m.n_states; ++x) {
    std::uniform_int_distribution<std::size_t> pick(0, m.n_actions(x) - 1);
    f.choice[x] = pick(rng);
  }
  return f;
}

/// Exhaustive list when there are at most `limit` policies; otherwise
/// `seed_policy` (if given) followed by uniform samples, `sample` in total.
template <class Rng>
std::vector<StationaryPolicy> candidate_policies(const FiniteMDP& m, std::uint64_t limit,
                                                 std::size_t sample, Rng& rng,
                                                 const StationaryPolicy* seed_policy = nullptr) {
  std::vector<StationaryPolicy> out;
  const auto count = policy_count(m);
  if (count && *count <= limit) {
    out.reserve(static_cast<std::size_t>(*count));
    for (std::uint64_t i = 0; i < *count; ++i) out.push_back(policy_from_index(m, i));
    return out;
  }
  if (seed_policy) out.push_back(*seed_policy);
  while (out.size() < sample) out.push_back(random_policy(m, rng));
  return out;
}

// ---------------------------------------------------------------------------
// Built-in models

/// Two-state chain with an absorbing zero-cost state 0 and a unit-cost state 1
/// that leaves for 0 with probability rho.
inline FiniteMDP make_example1(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("make_example1: rho must lie in (0,1)");
  FiniteMDP m;
  m.n_states = 2;
  m.actions = {{0}, {0}};
  m.cost = {{0.0}, {1.0}};
  m.kernel = {{{1.0, 0.0}}, {{rho, 1.0 - rho}}};
  std::ostringstream os;
  os.precision(17);
  os << "example1(rho=" << rho << ")";
  m.label = os.str();
  return m;
}

/// Single state, single action, constant cost kappa.
inline FiniteMDP make_constant_chain(double kappa) {
  FiniteMDP m;
  m.n_states = 1;
  m.actions = {{0}};
  m.cost = {{kappa}};
  m.kernel = {{{1.0}}};
  m.label = "constant";
  return m;
}

enum class RegimeKind { I, II, III };

struct Regime {
  RegimeKind kind;
  double boundary;  // -log(1 - rho)
};

inline const char* to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::I: return "I";
    case RegimeKind::II: return "II";
    case RegimeKind::III: return "III";
  }
  return "?";
}

inline constexpr double kRegimeTolerance = 1e-12;

/// Position of the risk factor relative to -log(1-rho) for the two-state chain.
inline Regime classify_regime(double rho, double gamma) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("classify_regime: rho must lie in (0,1)");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw DomainError("classify_regime: gamma must be positive");
  const double boundary = -std::log1p(-rho);
  if (std::abs(gamma - boundary) <= kRegimeTolerance) return {RegimeKind::II, boundary};
  return {gamma < boundary ? RegimeKind::I : RegimeKind::III, boundary};
}

// ---------------------------------------------------------------------------
// Policy-induced chain

inline Eigen::MatrixXd policy_matrix(const FiniteMDP& m, const StationaryPolicy& f) {
  const auto n = static_cast<Eigen::Index>(m.n_states);
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const auto row = m.row(static_cast<std::size_t>(x), f.choice[static_cast<std::size_t>(x)]);
    for (Eigen::Index y = 0; y < n; ++y) p(x, y) = row[static_cast<std::size_t>(y)];
  }
  return p;
}

inline Eigen::VectorXd policy_cost(const FiniteMDP& m, const StationaryPolicy& f) {
  Eigen::VectorXd c(static_cast<Eigen::Index>(m.n_states));
  for (std::size_t x = 0; x < m.n_states; ++x)
    c(static_cast<Eigen::Index>(x)) = m.cost[x][f.choice[x]];
  return c;
}

inline constexpr double kCesaroTolerance = 1e-10;

/// Long-run expected average cost under f (risk-neutral), per starting state.
///
/// Cesaro averages A_n = (1/n) sum_{k<n} P^k are doubled, A_{2n} = (A_n + P^n A_n)/2,
/// until successive A_n c differ by at most 1e-10 in sup norm. Doubling keeps
/// periodic chains well-defined and reaches n ~ 1e10 in a few dozen products.
inline std::vector<double> neutral_average_cost(const FiniteMDP& m, const StationaryPolicy& f) {
  require_valid(m);
  require_valid(m, f);
  const Eigen::MatrixXd p = policy_matrix(m, f);
  const Eigen::VectorXd c = policy_cost(m, f);

  const auto n = p.rows();
  Eigen::MatrixXd avg = Eigen::MatrixXd::Identity(n, n);  // A_1
  Eigen::MatrixXd pow = p;                                // P^1
  Eigen::VectorXd prev = avg * c;
  Eigen::VectorXd prev_extrap = prev;
  constexpr int kMaxDoublings = 62;
  double diff = std::numeric_limits<double>::infinity();
  for (int j = 0; j < kMaxDoublings; ++j) {
    avg = 0.5 * (avg + pow * avg);
    pow = pow * pow;
    // Rows drift off the simplex under repeated squaring.
    for (Eigen::Index r = 0; r < n; ++r) {
      pow.row(r) /= pow.row(r).sum();
      avg.row(r) /= avg.row(r).sum();
    }
    Eigen::VectorXd cur = avg * c;
    // A_n c = g + b/n + o(1/n); one Richardson step removes b/n.
    Eigen::VectorXd extrap = 2.0 * cur - prev;
    diff = (extrap - prev_extrap).lpNorm<Eigen::Infinity>();
    const double plain = (cur - prev).lpNorm<Eigen::Infinity>();
    prev = std::move(cur);
    prev_extrap = std::move(extrap);
    if (j > 0 && diff <= kCesaroTolerance) {
      return {prev_extrap.data(), prev_extrap.data() + prev_extrap.size()};
    }
    if (plain <= kCesaroTolerance) {
      return {prev.data(), prev.data() + prev.size()};
    }
    diff = std::min(diff, plain);
  }
  throw ConvergenceError("neutral_average_cost: Cesaro averages did not settle", diff);
}

}  // namespace rsmdp
