#pragma once

// Relative entropy, the logarithmic moment-generating function and its
// variational characterization over finite probability vectors.
//
//   log sum_y nu(y) e^{h(y)} = max_mu [ -R(mu || nu) + sum_y mu(y) h(y) ]
//
// with the maximum attained only at the tilted vector mu0 = nu e^{h} / sum nu e^{h}.
//
// Every exponential is taken after subtracting the maximum of h over the
// support of nu, so no positive argument ever reaches exp().

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "rsmdp/errors.hpp"

namespace rsmdp {

/// Finite real or +infinity (only relative entropy produces the latter).
using ExtendedReal = double;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline bool is_prob_vector(std::span<const double> p, double tol = 1e-12) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return !p.empty() && std::abs(sum - 1.0) <= tol;
}

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw DomainError(std::string(op) + ": dimension mismatch");
}

}  // namespace detail

/// R(mu || nu) with 0 log(0/q) = 0 and +inf when mu is not absolutely
/// continuous with respect to nu.
inline ExtendedReal relative_entropy(std::span<const double> mu, std::span<const double> nu) {
  detail::require_same_size(mu.size(), nu.size(), "relative_entropy");
  double r = 0.0;
  for (std::size_t y = 0; y < mu.size(); ++y) {
    if (mu[y] <= 0.0) continue;
    if (nu[y] <= 0.0) return kInfinity;
    r += mu[y] * (std::log(mu[y]) - std::log(nu[y]));
  }
  // Nonnegative in exact arithmetic; rounding can leave -1e-17 near mu == nu.
  return std::max(0.0, r);
}

/// log sum nu(y) e^{h(y)} split as shift + log_lead + log1p_tail, where shift is
/// the largest h on the support of nu, log_lead the log-weight of the first
/// state attaining it, and log1p_tail = log1p(sum_{others} nu e^{h-shift} / nu_lead).
/// Keeping the pieces apart lets callers cancel shift and log_lead exactly.
struct LogMgfParts {
  double shift = 0.0;
  double log_lead = 0.0;
  double log1p_tail = 0.0;

  double value() const { return shift + log_lead + log1p_tail; }
};

inline LogMgfParts log_mgf_parts(std::span<const double> h, std::span<const double> nu) {
  detail::require_same_size(h.size(), nu.size(), "log_mgf");
  std::size_t lead = nu.size();
  for (std::size_t y = 0; y < nu.size(); ++y) {
    if (nu[y] <= 0.0) continue;
    if (lead == nu.size() || h[y] > h[lead]) lead = y;
  }
  if (lead == nu.size()) throw DomainError("log_mgf: reference vector has empty support");

  const double shift = h[lead];
  double tail = 0.0;
  for (std::size_t y = 0; y < nu.size(); ++y) {
    if (y == lead || nu[y] <= 0.0) continue;
    tail += nu[y] * std::exp(h[y] - shift);
  }
  return {shift, std::log(nu[lead]), std::log1p(tail / nu[lead])};
}

/// log sum_y nu(y) e^{h(y)}, max-shifted.
inline double log_mgf(std::span<const double> h, std::span<const double> nu) {
  return log_mgf_parts(h, nu).value();
}

/// Exponentially tilted vector mu0(y) = nu(y) e^{h(y) - log_mgf(h, nu)}.
inline std::vector<double> tilt(std::span<const double> h, std::span<const double> nu) {
  detail::require_same_size(h.size(), nu.size(), "tilt");
  double shift = -kInfinity;
  for (std::size_t y = 0; y < nu.size(); ++y)
    if (nu[y] > 0.0) shift = std::max(shift, h[y]);
  if (shift == -kInfinity) throw DomainError("tilt: reference vector has empty support");

  std::vector<double> mu(nu.size(), 0.0);
  double sum = 0.0;
  for (std::size_t y = 0; y < nu.size(); ++y) {
    if (nu[y] <= 0.0) continue;
    mu[y] = nu[y] * std::exp(h[y] - shift);
    sum += mu[y];
  }
  for (double& v : mu) v /= sum;
  return mu;
}

/// log_mgf(h, nu) - (-R(mu || nu) + <mu, h>). Nonnegative; zero only at mu = tilt(h, nu).
inline ExtendedReal variational_gap(std::span<const double> mu, std::span<const double> h,
                                    std::span<const double> nu) {
  detail::require_same_size(mu.size(), h.size(), "variational_gap");
  detail::require_same_size(mu.size(), nu.size(), "variational_gap");
  const double r = relative_entropy(mu, nu);
  if (std::isinf(r)) return kInfinity;
  double inner = 0.0;
  for (std::size_t y = 0; y < mu.size(); ++y)
    if (mu[y] > 0.0) inner += mu[y] * h[y];
  return log_mgf(h, nu) - (inner - r);
}

}  // namespace rsmdp
