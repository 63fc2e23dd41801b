#pragma once

// Command-line front end. Exit codes: 0 success, 1 model validation failure,
// 2 assertion or verdict failure, 3 I/O, parse or argument error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rsmdp/average.hpp"
#include "rsmdp/bellman.hpp"
#include "rsmdp/condition_b.hpp"
#include "rsmdp/errors.hpp"
#include "rsmdp/example1.hpp"
#include "rsmdp/game.hpp"
#include "rsmdp/model.hpp"
#include "rsmdp/model_io.hpp"

namespace rsmdp {

enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitFailed = 2, kExitIo = 3 };

namespace cli {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// CSV rows collected in memory and written once, LF-terminated.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) { add(std::move(header)); }

  void add(std::vector<std::string> cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  void write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ParseError("cannot open '" + path + "' for writing");
    os << text_;
    if (!os.flush()) throw ParseError("write to '" + path + "' failed");
  }

 private:
  std::string text_;
};

/// "start:count" -> geometric grid.
inline std::vector<double> parse_beta_grid(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw DomainError("--beta-grid expects start:count");
  double start = 0.0;
  int count = 0;
  try {
    std::size_t used = 0;
    start = std::stod(text.substr(0, colon), &used);
    if (used != colon) throw DomainError("");
    const std::string tail = text.substr(colon + 1);
    count = std::stoi(tail, &used);
    if (used != tail.size()) throw DomainError("");
  } catch (const std::exception&) {
    throw DomainError("--beta-grid expects start:count, got '" + text + "'");
  }
  return geometric_beta_grid(start, count);
}

struct Common {
  std::string csv;
  double tol = 1e-10;
  std::string beta_grid = "0.9:13";
};

inline void maybe_write(const Csv& csv, const std::string& path) {
  if (!path.empty()) csv.write(path);
}

inline int cmd_validate(const std::string& path, const Common& c, std::ostream& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Csv csv({"check", "detail"});
  try {
    const auto m = load_model(buf.str());
    out << "valid: " << m.n_states << " states, " << m.n_pairs() << " state-action pairs\n";
    csv.add({"valid", std::to_string(m.n_states)});
    maybe_write(csv, c.csv);
    return kExitOk;
  } catch (const ValidationError& e) {
    out << "invalid model\n" << e.what() << "\n";
    csv.add({"invalid", "\"" + std::string(e.what()) + "\""});
    maybe_write(csv, c.csv);
    return kExitInvalid;
  }
}

inline int cmd_solve_discounted(const FiniteMDP& m, double beta, double gamma,
                                std::optional<std::int64_t> truncate, const Common& c,
                                std::ostream& out) {
  const Truncation trunc = truncate ? Truncation::at(*truncate) : Truncation::none();
  const auto sol = solve_discounted(m, beta, gamma, trunc, c.tol);
  out << "beta " << short_num(beta) << "  gamma " << short_num(gamma) << "  truncation "
      << (trunc.active() ? std::to_string(trunc.level()) : std::string("none")) << "\n";
  out << "iterations " << sol.iterations << "  error bound " << short_num(sol.residual) << "\n";
  if (sol.ill_conditioned) out << "warning: 1 - beta < 1e-6, values are ill-conditioned\n";
  out << "state  action  V_beta\n";
  Csv csv({"state", "beta", "gamma", "V_beta", "action"});
  for (std::size_t x = 0; x < m.n_states; ++x) {
    const int a = sol.policy.action(m, x);
    out << x << "  " << a << "  " << num(sol.value.values[x]) << "\n";
    csv.add({std::to_string(x), num(beta), num(gamma), num(sol.value.values[x]), std::to_string(a)});
  }
  maybe_write(csv, c.csv);
  return kExitOk;
}

inline int cmd_solve_average(const FiniteMDP& m, double gamma, std::size_t tail, const Common& c,
                             std::ostream& out) {
  const auto betas = parse_beta_grid(c.beta_grid);
  const auto a = solve_average(m, gamma, betas, c.tol, tail);
  out << "beta  scaled_m  m_beta  iterations  status\n";
  Csv csv({"kind", "state", "beta", "value"});
  for (const auto& e : a.sweep.entries) {
    if (e.ok) {
      out << num(e.beta) << "  " << num(e.scaled) << "  " << num(e.m_beta) << "  " << e.iterations
          << "  ok\n";
      csv.add({"scaled_m", "", num(e.beta), num(e.scaled)});
    } else {
      out << num(e.beta) << "  -  -  -  failed: " << e.error << "\n";
      csv.add({"failed", "", num(e.beta), num(e.residual)});
    }
  }
  const auto growth = growth_rate(m, a.policy, gamma, kReportTolerance);
  out << "l_hat " << num(a.l_hat) << "  (spread over last 3: " << short_num(a.l_hat_diagnostic)
      << ")\n";
  out << "average cost l_hat/gamma " << num(a.l_hat / gamma) << "\n";
  out << "state  h  action  inequality_residual  equation_residual  growth\n";
  csv.add({"l_hat", "", "", num(a.l_hat)});
  bool ok = true;
  for (std::size_t x = 0; x < m.n_states; ++x) {
    out << x << "  " << num(a.h[x]) << "  " << a.policy.action(m, x) << "  "
        << num(a.inequality_residual[x]) << "  " << num(a.equation_residual[x]) << "  "
        << num(growth.growth[x]) << "\n";
    const auto s = std::to_string(x);
    csv.add({"h", s, "", num(a.h[x])});
    csv.add({"action", s, "", std::to_string(a.policy.action(m, x))});
    csv.add({"inequality_residual", s, "", num(a.inequality_residual[x])});
    csv.add({"equation_residual", s, "", num(a.equation_residual[x])});
    csv.add({"growth", s, "", num(growth.growth[x])});
    ok = ok && a.inequality_residual[x] >= -kResidualTolerance;
  }
  out << (ok ? "optimality inequality holds within 1e-8\n"
             : "optimality inequality violated beyond 1e-8\n");
  maybe_write(csv, c.csv);
  return ok ? kExitOk : kExitFailed;
}

inline int cmd_check_b(const FiniteMDP& m, double gamma, double eta, const Common& c,
                       std::ostream& out) {
  const auto betas = parse_beta_grid(c.beta_grid);
  const auto rep = condition_b_scan(m, gamma, betas, eta, c.tol);
  out << "beta  state  h_beta  bound\n";
  Csv csv({"state", "beta", "h_beta", "bound", "verdict"});
  for (std::size_t i = 0; i < rep.betas.size(); ++i)
    for (std::size_t x = 0; x < m.n_states; ++x) {
      out << num(rep.betas[i]) << "  " << x << "  " << num(rep.h[i][x]) << "  "
          << num(rep.bounds[i][x]) << "\n";
      csv.add({std::to_string(x), num(rep.betas[i]), num(rep.h[i][x]), num(rep.bounds[i][x]), ""});
    }
  out << "state  sup_h  hitting_bound  growing\n";
  for (std::size_t x = 0; x < m.n_states; ++x)
    out << x << "  " << num(rep.sup_h[x]) << "  " << num(rep.hitting_bound[x]) << "  "
        << (rep.growing[x] ? "yes" : "no") << "\n";
  out << "bounds from " << (rep.exhaustive ? "all" : "sampled") << " deterministic policies\n";
  out << "verdict: " << to_string(rep.verdict) << " (" << rep.note << ")\n";
  csv.add({"", "", "", "", to_string(rep.verdict)});
  maybe_write(csv, c.csv);
  return rep.verdict == ConditionBVerdict::HoldsOnGrid ? kExitOk : kExitFailed;
}

inline int cmd_verify_game(const FiniteMDP& m, double beta, double gamma, std::size_t samples,
                           double check_tol, std::uint64_t seed, const Common& c,
                           std::ostream& out) {
  const auto sol = solve_untruncated(m, beta, gamma, c.tol);
  const auto& w = sol.value.values;
  const auto p0 = opponent_tilt(m, w, beta);
  const double series_tol = std::min(c.tol, check_tol) * 1e-2;
  const auto saddle = discounted_game_cost(m, sol.policy, p0, beta, gamma, series_tol);

  double saddle_gap = 0.0;
  for (std::size_t x = 0; x < m.n_states; ++x)
    saddle_gap = std::max(saddle_gap, std::abs(saddle[x] - w[x]));

  std::mt19937_64 rng(seed);
  double worst_opponent = -kInfinity;  // max over x, p of V(f_beta, p) - w
  for (std::size_t i = 0; i < samples; ++i) {
    const auto p = random_tilted_opponent(m, rng);
    const auto v = discounted_game_cost(m, sol.policy, p, beta, gamma, series_tol);
    for (std::size_t x = 0; x < m.n_states; ++x) worst_opponent = std::max(worst_opponent, v[x] - w[x]);
  }
  double worst_controller = kInfinity;  // min over x, pi of V(pi, p0) - w
  for (std::size_t i = 0; i < samples; ++i) {
    const auto f = random_policy(m, rng);
    const auto v = discounted_game_cost(m, f, p0, beta, gamma, series_tol);
    for (std::size_t x = 0; x < m.n_states; ++x)
      worst_controller = std::min(worst_controller, v[x] - w[x]);
  }

  const bool saddle_ok = saddle_gap <= check_tol;
  const bool opp_ok = samples == 0 || worst_opponent <= check_tol;
  const bool ctl_ok = samples == 0 || worst_controller >= -check_tol;

  out << "beta " << short_num(beta) << "  gamma " << short_num(gamma) << "  samples " << samples
      << "\n";
  out << "state  w_beta  V(f_beta,p0)\n";
  Csv csv({"check", "state", "value", "pass"});
  for (std::size_t x = 0; x < m.n_states; ++x) {
    out << x << "  " << num(w[x]) << "  " << num(saddle[x]) << "\n";
    csv.add({"w_beta", std::to_string(x), num(w[x]), ""});
  }
  auto line = [&](const char* name, double v, bool ok) {
    out << name << "  " << num(v) << "  " << (ok ? "pass" : "FAIL") << "\n";
    csv.add({name, "", num(v), ok ? "1" : "0"});
  };
  line("saddle_gap", saddle_gap, saddle_ok);
  if (samples > 0) {
    line("max_opponent_excess", worst_opponent, opp_ok);
    line("min_controller_excess", worst_controller, ctl_ok);
  }
  maybe_write(csv, c.csv);
  return saddle_ok && opp_ok && ctl_ok ? kExitOk : kExitFailed;
}

inline int cmd_example1(double rho, double gamma, const Common& c, std::ostream& out) {
  const auto betas = parse_beta_grid(c.beta_grid);
  const auto r = example1_report(rho, gamma, betas, c.tol);
  auto pf = [](bool b) { return b ? "pass" : "FAIL"; };
  out << "rho " << short_num(rho) << "  gamma " << short_num(gamma) << "  regime "
      << to_string(r.regime.kind) << "  (boundary gamma = " << num(r.regime.boundary) << ")\n";
  const char* kind = r.bound_kind == BoundKind::UpperI     ? "upper"
                     : r.bound_kind == BoundKind::LowerIII ? "lower"
                                                           : "none";
  out << "beta  V_beta(1)  bound(" << kind << ")  margin  check\n";
  Csv csv({"beta", "V_beta", "bound", "margin", "pass", "verdict"});
  for (const auto& row : r.rows) {
    if (!row.solved) {
      out << num(row.beta) << "  solve failed  FAIL\n";
      csv.add({num(row.beta), "", "", "", "0", ""});
      continue;
    }
    const bool has_bound = !std::isnan(row.bound);
    out << num(row.beta) << "  " << num(row.v1) << "  " << (has_bound ? num(row.bound) : "-")
        << "  " << (has_bound ? num(row.margin) : "-") << "  " << pf(row.pass)
        << (row.relaxed ? "  (solved to " + short_num(row.slack) + ")" : std::string()) << "\n";
    csv.add({num(row.beta), num(row.v1), has_bound ? num(row.bound) : "",
             has_bound ? num(row.margin) : "", row.pass ? "1" : "0", ""});
  }
  out << "Condition (B): " << to_string(r.condition_b.verdict) << "  " << pf(r.verdict_pass)
      << "  (" << r.condition_b.note << ")\n";
  out << "growth J(1,f) " << num(r.growth1) << "  J*(1) " << num(r.j_star1) << "  J(0,f) "
      << num(r.growth0) << "  " << pf(r.growth_pass) << "\n";
  if (r.regime.kind == RegimeKind::I) {
    out << "optimality inequality residuals (1 - beta down to 1e-11):";
    for (double v : r.residual) out << "  " << num(v);
  } else {
    out << "optimality inequality residual at state 1, l = 0:";
    for (std::size_t i = 0; i < r.residual.size(); ++i)
      out << "  h(1)=" << short_num(r.residual_probe[i]) << ": " << num(r.residual[i]);
  }
  out << "  " << pf(r.residual_pass) << "\n";
  out << "overall: " << pf(r.passed()) << "\n";
  csv.add({"", "", "", "", r.passed() ? "1" : "0", to_string(r.condition_b.verdict)});
  maybe_write(csv, c.csv);
  return r.passed() ? kExitOk : kExitFailed;
}

}  // namespace cli

/// Parses argv-style arguments (without the program name) and runs one subcommand.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Risk-sensitive average-cost MDP diagnostics", "rsmdp"};
  app.require_subcommand(1);
  cli::Common c;
  auto common = [&](CLI::App* s, bool grid) {
    s->add_option("--csv", c.csv, "write machine-readable CSV to this path");
    s->add_option("--tol", c.tol, "solver tolerance")->capture_default_str();
    if (grid)
      s->add_option("--beta-grid", c.beta_grid, "geometric beta grid start:count")
          ->capture_default_str();
  };

  std::string model_path;
  double beta = 0.0, gamma = 0.0, eta = 0.0, rho = 0.0, check_tol = 1e-8;
  std::optional<std::int64_t> truncate;
  std::size_t tail = kDefaultTail, samples = 100;
  std::uint64_t seed = 20240601;

  auto* validate = app.add_subcommand("validate", "check a model file");
  validate->add_option("model", model_path)->required();
  validate->add_option("--csv", c.csv, "write machine-readable CSV to this path");

  auto* disc = app.add_subcommand("solve-discounted", "solve the discounted log-value equation");
  disc->add_option("model", model_path)->required();
  disc->add_option("--beta", beta)->required();
  disc->add_option("--gamma", gamma)->required();
  disc->add_option("--truncate", truncate, "cost truncation level N");
  common(disc, false);

  auto* avg = app.add_subcommand("solve-average", "vanishing-discount sweep and optimality check");
  avg->add_option("model", model_path)->required();
  avg->add_option("--gamma", gamma)->required();
  avg->add_option("--tail", tail, "tail window for h")->capture_default_str();
  common(avg, true);

  auto* chk = app.add_subcommand("check-b", "uniform boundedness of h_beta on a beta grid");
  chk->add_option("model", model_path)->required();
  chk->add_option("--gamma", gamma)->required();
  chk->add_option("--eta", eta)->capture_default_str();
  common(chk, true);

  auto* game = app.add_subcommand("verify-game", "saddle-point checks of the entropy game");
  game->add_option("model", model_path)->required();
  game->add_option("--gamma", gamma)->required();
  game->add_option("--beta", beta)->required();
  game->add_option("--samples", samples)->capture_default_str();
  game->add_option("--check-tol", check_tol)->capture_default_str();
  game->add_option("--seed", seed)->capture_default_str();
  common(game, false);

  auto* ex1 = app.add_subcommand("example1", "two-state regression report");
  ex1->add_option("--rho", rho)->required();
  ex1->add_option("--gamma", gamma)->required();
  common(ex1, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kExitIo;
  }

  try {
    if (validate->parsed()) return cli::cmd_validate(model_path, c, out);
    if (ex1->parsed()) return cli::cmd_example1(rho, gamma, c, out);
    const FiniteMDP m = load_model_file(model_path);
    if (disc->parsed()) return cli::cmd_solve_discounted(m, beta, gamma, truncate, c, out);
    if (avg->parsed()) return cli::cmd_solve_average(m, gamma, tail, c, out);
    if (chk->parsed()) return cli::cmd_check_b(m, gamma, eta, c, out);
    if (game->parsed()) return cli::cmd_verify_game(m, beta, gamma, samples, check_tol, seed, c, out);
  } catch (const ValidationError& e) {
    err << "invalid model: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << " (best bound " << e.best_residual() << ")\n";
    return kExitFailed;
  } catch (const InadmissibleError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitIo;
}

}  // namespace rsmdp
