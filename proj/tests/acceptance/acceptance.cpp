// One PASS/FAIL line per acceptance criterion; nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rsmdp/cli.hpp"
#include "rsmdp/rsmdp.hpp"

using namespace rsmdp;

namespace {

const std::string kExample1 = std::string(RSMDP_MODELS_DIR) + "/example1.json";

// Closed forms at rho = 0.5, evaluated once from their formulas.
const double kRegimeOneSup = std::log(std::exp(0.5) * 0.5 / (1.0 - std::exp(0.5) * 0.5));
const double kRegimeThreeRate = 1.0 + std::log(0.5);

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && out_.pass) out_.detail = what;
    out_.pass = out_.pass && ok;
  }
  void note(const std::string& s) {
    if (out_.pass) out_.detail = s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int quiet_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str();
  return code;
}

// 1. Regime I: l-hat = 0 exactly, residuals >= -1e-8, growth of f-hat = 0 within 1e-6.
Outcome criterion1() {
  Check c;
  const auto betas = geometric_beta_grid(0.9, 33);
  std::string text;
  c.require(quiet_cli({"solve-average", kExample1, "--gamma", "0.5", "--beta-grid", "0.9:33"},
                      &text) == kExitOk,
            "solve-average exit code");
  const auto a = solve_average(make_example1(0.5), 0.5, betas, 1e-10);
  for (const auto& e : a.sweep.entries) c.require(e.ok && e.m_beta == 0.0, "m_beta != 0");
  c.require(a.l_hat == 0.0, "l_hat != 0");
  double worst = 0.0;
  for (double r : a.inequality_residual) worst = std::min(worst, r);
  c.require(worst >= -1e-8, fmt("residual %.3e", worst));
  const auto g = growth_rate(make_example1(0.5), a.policy, 0.5, 1e-6);
  for (double v : g.growth) c.require(std::abs(v) <= 1e-6, fmt("growth %.3e", v));
  c.note(fmt("l_hat=0, min residual %.3e, max |growth| %.3e", worst,
             std::max(std::abs(g.growth[0]), std::abs(g.growth[1]))));
  return c.result();
}

// 2. Regime I: V_beta(1) < log(e^g(1-r)/(1-e^g(1-r))) on the default grid.
Outcome criterion2() {
  Check c;
  const auto m = make_example1(0.5);
  double min_margin = std::numeric_limits<double>::infinity();
  for (double beta : geometric_beta_grid()) {
    const auto sol = solve_untruncated(m, beta, 0.5, 1e-10);
    const double margin = kRegimeOneSup - sol.value.values[1];
    c.require(margin > 0.0, fmt("beta %.17g margin %.3e", beta, margin));
    min_margin = std::min(min_margin, margin);
  }
  c.note(fmt("bound %.16g, smallest margin %.6e", kRegimeOneSup, min_margin));
  return c.result();
}

// 3. Regime III: V_beta(1) > (g + log(1-r))/(1-beta), check-b diverging with
// exit 2, growth J(1) = 0.306852 within 1e-4 and J(0) = 0 within 1e-8.
Outcome criterion3() {
  Check c;
  const auto m = make_example1(0.5);
  // The true gap at 0.99 is about 6.4e-12, so solve to the floating-point
  // fixed point and cross-check against scalar bisection.
  const auto at99 = solve_untruncated(m, 0.99, 1.0, 1e-14);
  const double v99 = oracle::example1_v1(0.5, 1.0, 0.99);
  c.require(std::abs(at99.value.values[1] - v99) <= 1e-12,
            fmt("beta 0.99: solver %.17g vs bisection %.17g", at99.value.values[1], v99));
  const double b99 = example1_lower_bound(0.5, 1.0, 0.99);
  c.require(at99.value.values[1] > b99, fmt("beta 0.99: V %.17g <= %.17g", at99.value.values[1], b99));
  c.require(at99.value.values[1] > 30.6852, "beta 0.99: V <= 30.6852");
  // Full grid, allowing the solve residual and rounding floor.
  const auto rep = example1_report(0.5, 1.0, geometric_beta_grid());
  double worst = 0.0;
  for (const auto& row : rep.rows) {
    c.require(row.solved && row.pass,
              fmt("beta %.17g margin %.3e slack %.3e", row.beta, row.margin, row.slack));
    worst = std::min(worst, row.margin);
  }
  std::string text;
  const int code = quiet_cli({"check-b", kExample1, "--gamma", "1"}, &text);
  c.require(code == kExitFailed, "check-b exit code");
  c.require(text.find("verdict: diverging") != std::string::npos, "check-b verdict");
  const auto g = growth_rate(m, StationaryPolicy{{0, 0}}, 1.0, 1e-10);
  c.require(std::abs(g.growth[1] - kRegimeThreeRate) <= 1e-4, fmt("J(1) %.10g", g.growth[1]));
  c.require(std::abs(g.growth[0]) <= 1e-8, fmt("J(0) %.3e", g.growth[0]));
  c.note(fmt("V_0.99(1) - bound = %.3e; J(1) = %.10f; most negative grid margin %.3e",
             at99.value.values[1] - b99, g.growth[1], worst));
  return c.result();
}

// 4. Regime II: check-b diverging; J(1) within 1e-3 of 0 at 2^16; every finite
// candidate h gives a strictly negative residual at state 1.
Outcome criterion4() {
  Check c;
  const auto m = make_example1(0.5);
  const double gamma = std::log(2.0);
  std::string text;
  const int code = quiet_cli({"check-b", kExample1, "--gamma", cli::num(gamma)}, &text);
  c.require(code == kExitFailed && text.find("verdict: diverging") != std::string::npos,
            "check-b verdict");
  const auto r = evaluate_policy_risk(m, StationaryPolicy{{0, 0}}, gamma, std::size_t{1} << 16);
  c.require(std::abs(r.growth[1]) <= 1e-3, fmt("J(1) %.3e", r.growth[1]));
  double worst = -std::numeric_limits<double>::infinity();
  for (double h1 : {0.0, 1.0, 10.0, 100.0}) {
    const double res = optimality_residual(m, gamma, std::vector<double>{0.0, h1}, 0.0).inequality[1];
    c.require(res < 0.0, fmt("h(1)=%g residual %.3e", h1, res));
    worst = std::max(worst, res);
  }
  c.note(fmt("J(1) at 2^16 = %.3e; largest residual %.3e", r.growth[1], worst));
  return c.result();
}

// 5. Hitting cost on a 5x5 regime-I grid: closed form (relative 1e-10) and
// geometric series (1e-10).
Outcome criterion5() {
  Check c;
  double worst_rel = 0.0, worst_series = 0.0;
  for (double rho : {0.1, 0.3, 0.5, 0.7, 0.9})
    for (double frac : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double gamma = frac * -std::log1p(-rho);
      const auto m = make_example1(rho);
      const auto hit = hitting_exp_cost(m, StationaryPolicy{{0, 0}}, gamma, {true, false});
      c.require(hit.finite, "finite");
      const double z = std::exp(hit.u[1]);
      const double s = std::exp(gamma) * (1.0 - rho);
      const double closed = rho / (1.0 - rho) * s / (1.0 - s);
      worst_rel = std::max(worst_rel, std::abs(z - closed) / closed);
      worst_series = std::max(worst_series, std::abs(z - oracle::example1_hitting_series(rho, gamma)));
    }
  c.require(worst_rel <= 1e-10, fmt("closed form rel %.3e", worst_rel));
  c.require(worst_series <= 1e-10, fmt("series %.3e", worst_series));
  c.note(fmt("closed form rel %.2e, series abs %.2e", worst_rel, worst_series));
  return c.result();
}

// 6. j_n <= J_n + 1e-10 on 500 random instances.
Outcome criterion6() {
  Check c;
  std::mt19937_64 rng(6006);
  std::uniform_int_distribution<std::size_t> horizon(1, 10);
  std::uniform_real_distribution<double> gamma(0.05, 2.0);
  std::size_t violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 500; ++i) {
    const auto m = oracle::random_model(rng);
    const auto f = random_policy(m, rng);
    const auto k = random_tilted_opponent(m, rng);
    const std::size_t n = horizon(rng);
    const double g = gamma(rng);
    const auto j = game_cost_finite(m, f, k, g, n);
    const auto big = log_mgf_horizon(m, f, g, n);
    for (std::size_t x = 0; x < m.n_states; ++x) {
      worst = std::max(worst, j[x] - big[x]);
      if (j[x] > big[x] + 1e-10) ++violations;
    }
  }
  c.require(violations == 0, fmt("%g violations", double(violations)));
  c.note(fmt("0 violations; max j_n - J_n = %.3e", worst));
  return c.result();
}

// 7. Variational formula: gap at the tilt <= 1e-10, gap >= -1e-12 at 10^4
// random simplex points per instance.
Outcome criterion7() {
  Check c;
  std::mt19937_64 rng(7007);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  std::uniform_real_distribution<double> hv(-10.0, 10.0);
  double worst_tilt = 0.0, worst_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = dim(rng);
    const auto nu = oracle::random_simplex(rng, n, 0.2);
    std::vector<double> h(n);
    for (auto& v : h) v = hv(rng);
    worst_tilt = std::max(worst_tilt, variational_gap(tilt(h, nu), h, nu));
    for (int s = 0; s < 10000; ++s) {
      const auto mu = oracle::random_simplex(rng, n, 0.3);
      worst_gap = std::min(worst_gap, variational_gap(mu, h, nu));
    }
  }
  c.require(worst_tilt <= 1e-10, fmt("gap at tilt %.3e", worst_tilt));
  c.require(worst_gap >= -1e-12, fmt("min sampled gap %.3e", worst_gap));
  c.note(fmt("max gap at tilt %.2e, min sampled gap %.2e", worst_tilt, worst_gap));
  return c.result();
}

// 8. Contraction, range of truncated fixed points, monotonicity in N.
Outcome criterion8() {
  Check c;
  std::mt19937_64 rng(8008);
  oracle::ModelShape shape;
  shape.max_cost = 5.0;
  std::uniform_real_distribution<double> wv(-30.0, 30.0);
  const std::vector<std::int64_t> levels{1, 2, 3, 5};
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200; ++i) {
    const auto m = oracle::random_model(rng, shape);
    const double beta = (i % 3 == 0) ? 0.5 : (i % 3 == 1) ? 0.9 : 0.97;
    const double gamma = 0.25 + 0.25 * (i % 4);
    for (int t = 0; t < 5; ++t) {
      std::vector<double> w1(m.n_states), w2(m.n_states);
      double d = 0.0;
      for (std::size_t x = 0; x < m.n_states; ++x) {
        w1[x] = wv(rng);
        w2[x] = wv(rng);
        d = std::max(d, std::abs(w1[x] - w2[x]));
      }
      const auto t1 = bellman_apply(w1, m, beta, gamma, Truncation::none()).first;
      const auto t2 = bellman_apply(w2, m, beta, gamma, Truncation::none()).first;
      double td = 0.0;
      for (std::size_t x = 0; x < m.n_states; ++x) td = std::max(td, std::abs(t1[x] - t2[x]));
      worst_excess = std::max(worst_excess, td - beta * d);
      c.require(td <= beta * d + 1e-12, "contraction");
    }
    const auto sols = truncation_sweep(m, beta, gamma, levels, 1e-10);
    for (std::size_t k = 0; k < sols.size(); ++k)
      for (std::size_t x = 0; x < m.n_states; ++x) {
        const double s = (1.0 - beta) * sols[k].value.values[x];
        c.require(s >= 0.0 && s <= static_cast<double>(levels[k]) * gamma + 1e-10, "range");
        if (k > 0)
          c.require(sols[k].value.values[x] >= sols[k - 1].value.values[x], "monotone in N");
      }
  }
  c.note(fmt("max ||Tw1-Tw2|| - beta||w1-w2|| = %.3e", worst_excess));
  return c.result();
}

// 9. Saddle point on Example 1 and 20 random models.
Outcome criterion9() {
  Check c;
  std::mt19937_64 rng(9009);
  std::vector<FiniteMDP> models{make_example1(0.5)};
  for (int i = 0; i < 20; ++i) models.push_back(oracle::random_model(rng));
  double saddle = 0.0, opp = -std::numeric_limits<double>::infinity(),
         ctl = std::numeric_limits<double>::infinity();
  for (const auto& m : models)
    for (double beta : {0.5, 0.9, 0.99}) {
      const double gamma = 0.5;
      const auto sol = solve_untruncated(m, beta, gamma, 1e-11);
      const auto& w = sol.value.values;
      const auto p0 = opponent_tilt(m, w, beta);
      const auto v = discounted_game_cost(m, sol.policy, p0, beta, gamma, 1e-12);
      for (std::size_t x = 0; x < m.n_states; ++x) saddle = std::max(saddle, std::abs(v[x] - w[x]));
      for (int i = 0; i < 100; ++i) {
        const auto vk =
            discounted_game_cost(m, sol.policy, random_tilted_opponent(m, rng), beta, gamma, 1e-12);
        for (std::size_t x = 0; x < m.n_states; ++x) opp = std::max(opp, vk[x] - w[x]);
        const auto vf = discounted_game_cost(m, random_policy(m, rng), p0, beta, gamma, 1e-12);
        for (std::size_t x = 0; x < m.n_states; ++x) ctl = std::min(ctl, vf[x] - w[x]);
      }
    }
  c.require(saddle <= 1e-8, fmt("saddle gap %.3e", saddle));
  c.require(opp <= 1e-8, fmt("opponent excess %.3e", opp));
  c.require(ctl >= -1e-8, fmt("controller deficit %.3e", ctl));
  c.note(fmt("saddle gap %.2e, max opponent excess %.2e, min controller excess %.2e", saddle, opp,
             ctl));
  return c.result();
}

// 10. Jensen lower bound and the small-gamma limit.
Outcome criterion10() {
  Check c;
  std::mt19937_64 rng(10010);
  double worst_jensen = std::numeric_limits<double>::infinity(), worst_limit = 0.0;
  const std::size_t n_jensen = 200, n_limit = 10000;
  for (int i = 0; i < 50; ++i) {
    const auto m = oracle::random_model(rng);
    const auto f = random_policy(m, rng);
    const Eigen::MatrixXd p = policy_matrix(m, f);
    auto neutral = [&](std::size_t n) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(p.rows()), term = policy_cost(m, f);
      for (std::size_t k = 0; k < n; ++k) {
        acc += term;
        term = p * term;
      }
      return Eigen::VectorXd(acc / static_cast<double>(n));
    };
    const auto short_avg = neutral(n_jensen);
    for (double gamma : {0.01, 0.1, 1.0}) {
      const auto r = evaluate_policy_risk(m, f, gamma, n_jensen);
      for (std::size_t x = 0; x < m.n_states; ++x) {
        const double d = r.log_mgf[x] / (gamma * n_jensen) - short_avg(static_cast<Eigen::Index>(x));
        worst_jensen = std::min(worst_jensen, d);
        c.require(d >= -1e-10, fmt("Jensen %.3e", d));
      }
    }
    const auto long_avg = neutral(n_limit);
    const auto r = evaluate_policy_risk(m, f, 1e-3, n_limit);
    for (std::size_t x = 0; x < m.n_states; ++x) {
      const double d = std::abs(r.log_mgf[x] / (1e-3 * n_limit) - long_avg(static_cast<Eigen::Index>(x)));
      worst_limit = std::max(worst_limit, d);
      c.require(d <= 0.05, fmt("gamma=1e-3 gap %.3e", d));
    }
  }
  c.note(fmt("min Jensen slack %.2e, max gap at gamma=1e-3 %.2e", worst_jensen, worst_limit));
  return c.result();
}

// 11. 100 random 4-state 2-action models with gamma = 0.1 passing the
// Condition (B) scan: enumeration confirms min growth = l-hat/gamma and f-hat attains it.
Outcome criterion11() {
  Check c;
  std::mt19937_64 rng(11011);
  oracle::ModelShape shape;
  shape.min_states = shape.max_states = 4;
  shape.min_actions = shape.max_actions = 2;
  shape.max_cost = 1.0;
  shape.zero_prob = 0.0;
  const double gamma = 0.1;
  const auto betas = geometric_beta_grid();
  int certified = 0, skipped = 0;
  double worst = 0.0, worst_attain = 0.0;
  while (certified < 100 && certified + skipped < 1000) {
    const auto m = oracle::random_model(rng, shape);
    const auto sweep = discount_sweep(m, gamma, betas, 1e-6);
    if (sweep.successful().size() < 4 ||
        condition_b_from_sweep(m, gamma, sweep, 0.0).verdict != ConditionBVerdict::HoldsOnGrid) {
      ++skipped;
      continue;
    }
    ++certified;
    const double rate = estimate_average_constant(sweep).l_hat / gamma;
    const auto h = relative_value(sweep, kDefaultTail);
    const auto f_hat = optimality_residual(m, gamma, h, estimate_average_constant(sweep).l_hat).policy;
    std::vector<double> best(m.n_states, std::numeric_limits<double>::infinity());
    for (std::uint64_t i = 0; i < 16; ++i) {
      const auto g = growth_rate(m, policy_from_index(m, i), gamma, 1e-12).growth;
      for (std::size_t x = 0; x < m.n_states; ++x) best[x] = std::min(best[x], g[x]);
    }
    const auto gf = growth_rate(m, f_hat, gamma, 1e-12).growth;
    for (std::size_t x = 0; x < m.n_states; ++x) {
      worst = std::max(worst, std::abs(best[x] - rate));
      worst_attain = std::max(worst_attain, std::abs(gf[x] - best[x]));
    }
  }
  c.require(certified == 100, fmt("only %g models passed the scan", certified));
  c.require(worst <= 1e-4, fmt("|min growth - l_hat/gamma| %.3e", worst));
  c.require(worst_attain <= 1e-4, fmt("f-hat off the minimum by %.3e", worst_attain));
  c.note(fmt("%g models (%g skipped); max |min growth - l_hat/gamma| %.2e", certified, skipped,
             worst) +
         fmt(", f-hat gap %.2e", worst_attain));
  return c.result();
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC1  regime I average cost and optimality inequality", criterion1},
      {"AC2  regime I closed-form upper bound", criterion2},
      {"AC3  regime III lower bound, verdict, growth rates", criterion3},
      {"AC4  regime II verdict, growth, no finite h", criterion4},
      {"AC5  hitting-cost closed form and series", criterion5},
      {"AC6  finite-horizon game bounded by log-MGF", criterion6},
      {"AC7  variational formula", criterion7},
      {"AC8  contraction and truncated range", criterion8},
      {"AC9  saddle point", criterion9},
      {"AC10 Jensen bound and small-gamma limit", criterion10},
      {"AC11 small-model optimality by enumeration", criterion11},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %s  (%.1fs)  %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
