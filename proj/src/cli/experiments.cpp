#include "experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <sstream>
#include <thread>

#include "stochex/convergence.hpp"
#include "stochex/linear_solver.hpp"
#include "stochex/reduction.hpp"

namespace stochex::cli {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct SeedOutcome {
  std::vector<ReportRow> rows;
  bool rejected = false;  // singular jump or blow-up
};

// Runs task(i) for i in [0, count) on a pool of workers; results come back in
// index order regardless of scheduling.
template <typename Task>
std::vector<SeedOutcome> for_each_seed(int count, int threads, Task task) {
  std::vector<SeedOutcome> out(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(out.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        out[static_cast<std::size_t>(i)] = task(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(threads, count));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

ReportRow seed_row(std::string method, long steps, std::uint64_t seed) {
  ReportRow r;
  r.row = "seed";
  r.method = std::move(method);
  r.steps = steps;
  r.seed = seed;
  return r;
}

SeedOutcome rejected(long steps, std::uint64_t seed, const std::string& why) {
  SeedOutcome o;
  auto r = seed_row("*", steps, seed);
  r.flagged_blowups = 1;
  r.note = "rejected: " + why;
  o.rows.push_back(std::move(r));
  o.rejected = true;
  return o;
}

std::vector<std::pair<std::string, DriverSpecd>> bundle_drivers(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, DriverSpecd>> d{{"L", cfg.L->spec}};
  if (cfg.H && !cfg.H->functional) d.emplace_back("H", cfg.H->spec);
  return d;
}

MatrixPathd running_max_step(const RunningMaxStep& f, const MatrixPathd& brownian) {
  PathBuilder<double> out(brownian.grid_ptr());
  double running = 0.0;
  for (std::size_t k = 0; k < brownian.size(); ++k) {
    running = std::max(running, brownian.value(k)(f.component, 0));
    out.set(k, MatXd(f.scale * (f.level * std::floor(running / f.level))));
  }
  return std::move(out).finish();
}

// ---------------------------------------------------------------------------

SeedOutcome exp_verify_seed(const ExperimentConfig& cfg, long steps, std::uint64_t seed) {
  const auto start = Clock::now();
  std::optional<PathBundle<double>> bundle;
  std::optional<ExponentialPair<double>> pair_opt;
  try {
    bundle = sample_bundle(cfg.horizon, steps, cfg.brownian_dim, bundle_drivers(cfg), seed);
    pair_opt = exponential_inverse(bundle->at("L"), cfg.L->spec, cfg.tolerances.conditioning_warning);
  } catch (const NumericalError& e) {
    return rejected(steps, seed, e.what());
  }
  const auto& pair = *pair_opt;
  const auto& l = bundle->at("L");
  const auto n = l.rows();
  const MatXd id = MatXd::Identity(n, n);
  SeedOutcome o;

  double vu = 0.0;
  for (std::size_t k = 0; k < l.size(); ++k) {
    vu = std::max(vu, max_abs(pair.V.value(k) * pair.U.value(k) - id));
    vu = std::max(vu, max_abs(pair.V.left(k) * pair.U.left(k) - id));
  }
  const double base_ms = elapsed_ms(start);
  auto r = seed_row("vu-identity", steps, seed);
  r.sup_residual = vu;
  r.invertibility_margin = pair.invertibility_margin;
  r.wall_time_ms = base_ms;
  r.scale = 1.0;
  if (pair.conditioning_warning) r.note = "conditioning-warning";
  o.rows.push_back(r);

  double jump_identity = 0.0;
  for (std::size_t k : l.grid().jump_nodes()) {
    const MatXd inv = (id + l.jump(k)).partialPivLu().inverse();
    jump_identity = std::max(jump_identity, max_abs(MatXd(id + pair.W.jump(k)) - inv));
  }
  r = seed_row("leandre-jump", steps, seed);
  r.sup_residual = jump_identity;
  r.invertibility_margin = pair.invertibility_margin;
  r.wall_time_ms = base_ms;
  r.scale = 1.0;
  o.rows.push_back(r);

  if (n == 1) {
    const auto t0 = Clock::now();
    const auto closed = scalar_doleans(l, cfg.L->spec);
    r = seed_row("scalar-vs-matrix", steps, seed);
    r.cross_method_gap = sup_distance(pair.U, closed);
    r.invertibility_margin = pair.invertibility_margin;
    r.wall_time_ms = elapsed_ms(t0);
    r.scale = sup_norm(closed);
    o.rows.push_back(r);
  }
  return o;
}

SeedOutcome solve_seed(const ExperimentConfig& cfg, long steps, std::uint64_t seed) {
  std::optional<PathBundle<double>> bundle;
  try {
    bundle = sample_bundle(cfg.horizon, steps, cfg.brownian_dim, bundle_drivers(cfg), seed);
  } catch (const NumericalError& e) {
    return rejected(steps, seed, e.what());
  }
  LinearProblem<double> p{bundle->at("L"), cfg.L->spec,
                          cfg.H->functional ? running_max_step(*cfg.H->functional, bundle->brownian) : bundle->at("H"),
                          cfg.H->functional ? std::nullopt : std::optional<DriverSpecd>(cfg.H->spec)};
  SeedOutcome o;
  try {
    auto t0 = Clock::now();
    const auto direct = solve_direct(p);
    const double direct_ms = elapsed_ms(t0);
    for (Method m : cfg.methods) {
      t0 = Clock::now();
      const auto rep = m == Method::kDirect ? direct : solve(p, m);
      auto r = seed_row(std::string(method_name(m)), steps, seed);
      r.sup_residual = rep.residual;
      r.cross_method_gap = sup_distance(rep.X, direct.X);
      r.invertibility_margin = rep.diagnostics.invertibility_margin;
      r.wall_time_ms = m == Method::kDirect ? direct_ms : elapsed_ms(t0);
      r.scale = std::max(sup_norm(rep.X), sup_norm(direct.X));
      if (m != Method::kDirect) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "max_cond_U=%.6g", rep.diagnostics.max_condition_U);
        r.note = buf;
        if (rep.diagnostics.conditioning_warning) r.note += ";conditioning-warning";
      }
      o.rows.push_back(std::move(r));
    }
    if (p.spec_H) {
      t0 = Clock::now();
      const auto g = jacod_G(p);
      auto r = seed_row("g-identity", steps, seed);
      r.cross_method_gap = sup_distance(g, g_from_leandre(p));
      r.invertibility_margin = direct.diagnostics.invertibility_margin;
      r.wall_time_ms = elapsed_ms(t0);
      r.scale = sup_norm(g);
      o.rows.push_back(std::move(r));
    }
  } catch (const NumericalError& e) {
    return rejected(steps, seed, e.what());
  }
  return o;
}

SeedOutcome reduce_seed(const ExperimentConfig& cfg, long steps, std::uint64_t seed) {
  const auto& rc = *cfg.reduce;
  const auto n = rc.x0.size();
  auto grid = build_grid(cfg.horizon, steps);
  const auto brownian = sample_brownian<double>(grid, n, seed);
  NonlinearProblem<double> p{n, rc.C, rc.field, rc.lipschitz, rc.x0, cfg.horizon};
  const double bound = cfg.tolerances.blowup_bound;

  auto t0 = Clock::now();
  const auto direct = solve_nonlinear_direct(p, brownian, bound);
  const double direct_ms = elapsed_ms(t0);
  t0 = Clock::now();
  const auto red = solve_by_reduction(p, brownian, bound);
  const double red_ms = elapsed_ms(t0);

  std::optional<double> exact;
  if (rc.field_name == "linear" && n == 1 && rc.C_constant) {
    const double sigma = (*rc.C_constant)(0, 0);
    const double T = cfg.horizon;
    exact = rc.x0(0) * std::exp((rc.field_a - 0.5 * sigma * sigma) * T + sigma * brownian.back()(0, 0));
  }
  const bool blown = direct.blew_up || red.Y.blew_up;

  SeedOutcome o;
  o.rejected = blown;
  auto r = seed_row("direct-em", steps, seed);
  r.flagged_blowups = direct.blew_up ? 1 : 0;
  r.wall_time_ms = direct_ms;
  if (exact && !blown) {
    r.sup_residual = std::abs(direct.path.back()(0, 0) - *exact);
    r.scale = std::abs(*exact);
  }
  if (direct.blew_up) r.note = "blow-up at node " + std::to_string(direct.abort_node);
  o.rows.push_back(r);

  r = seed_row("reduction", steps, seed);
  r.flagged_blowups = red.Y.blew_up ? 1 : 0;
  r.wall_time_ms = red_ms;
  r.invertibility_margin = red.pair.invertibility_margin;
  if (exact && !blown) {
    r.sup_residual = std::abs(red.X.back()(0, 0) - *exact);
    r.scale = std::abs(*exact);
  }
  r.note = "rde integrand V(s) f(s, U(s) Y(s)) with V = U^-1 at the integration time";
  if (red.Y.blew_up) r.note += ";blow-up at node " + std::to_string(red.Y.abort_node);
  o.rows.push_back(r);

  r = seed_row("cross-route", steps, seed);
  r.flagged_blowups = blown ? 1 : 0;
  if (!blown) {
    r.cross_method_gap = sup_distance(direct.path, red.X);
    r.scale = sup_norm(direct.path);
  }
  o.rows.push_back(r);
  return o;
}

// ---------------------------------------------------------------------------

struct Series {
  std::vector<double> dt;
  std::vector<double> rms;
  bool exact = true;  // every seed value within the machine-zero threshold
  bool present = false;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Summary {
  std::vector<ReportRow> rows;
  bool check_failed = false;
  std::vector<std::string> messages;
};

Summary summarize(const ExperimentConfig& cfg, const std::vector<ReportRow>& seed_rows) {
  std::vector<std::string> methods;
  for (const auto& r : seed_rows)
    if (r.method != "*" && std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);

  Summary s;
  const auto& tol = cfg.tolerances;
  for (const auto& m : methods) {
    Series res, gap;
    for (long steps : cfg.steps) {
      double sr = 0.0, sg = 0.0, margin = 1.0;
      long nr = 0, ng = 0, flagged = 0;
      bool any_margin = false;
      for (const auto& r : seed_rows) {
        if (r.steps != steps) continue;
        if (r.method == "*") {
          if (m == methods.front()) ++flagged;
          continue;
        }
        if (r.method != m) continue;
        flagged += r.flagged_blowups;
        const double zero = tol.machine_zero * (1.0 + r.scale);
        if (r.sup_residual) {
          sr += *r.sup_residual * *r.sup_residual;
          ++nr;
          res.exact = res.exact && *r.sup_residual <= zero;
        }
        if (r.cross_method_gap) {
          sg += *r.cross_method_gap * *r.cross_method_gap;
          ++ng;
          gap.exact = gap.exact && *r.cross_method_gap <= zero;
        }
        if (r.invertibility_margin) {
          margin = any_margin ? std::min(margin, *r.invertibility_margin) : *r.invertibility_margin;
          any_margin = true;
        }
      }
      ReportRow row;
      row.row = "rms";
      row.method = m;
      row.steps = steps;
      row.flagged_blowups = flagged;
      if (any_margin) row.invertibility_margin = margin;
      const double dt = cfg.horizon / static_cast<double>(steps);
      if (nr > 0) {
        row.sup_residual = std::sqrt(sr / static_cast<double>(nr));
        res.dt.push_back(dt);
        res.rms.push_back(*row.sup_residual);
        res.present = true;
      }
      if (ng > 0) {
        row.cross_method_gap = std::sqrt(sg / static_cast<double>(ng));
        gap.dt.push_back(dt);
        gap.rms.push_back(*row.cross_method_gap);
        gap.present = true;
      }
      s.rows.push_back(std::move(row));
    }

    if (cfg.steps.size() < 3) continue;
    ReportRow order;
    order.row = "order";
    order.method = m;
    std::vector<std::string> notes;
    auto estimate = [&](const Series& series, const char* label, std::optional<double>& slot) {
      if (!series.present) return;
      if (series.dt.size() < 3) {
        notes.push_back(std::string(label) + ":too-few-levels");
        return;
      }
      const auto est = estimate_order(series.dt, series.rms);
      if (est) {
        slot = est->order;
        notes.push_back(std::string("se_") + label + "=" + fmt(est->std_error));
        if (est->flat) notes.push_back(std::string("flat_") + label);
      }
      if (series.exact) {
        notes.push_back(std::string(label) + ":exact");
        return;
      }
      const bool in_band = est && est->order >= tol.order_min && est->order <= tol.order_max;
      if (!in_band) {
        s.check_failed = true;
        s.messages.push_back(m + " " + label + ": empirical order " + (est ? fmt(est->order) : std::string("undefined")) +
                             " outside [" + fmt(tol.order_min) + ", " + fmt(tol.order_max) + "]");
      }
    };
    estimate(res, "residual", order.sup_residual);
    estimate(gap, "gap", order.cross_method_gap);
    for (std::size_t i = 0; i < notes.size(); ++i) order.note += (i ? ";" : "") + notes[i];
    s.rows.push_back(std::move(order));
  }
  return s;
}

RunResult run_levels(const ExperimentConfig& cfg, const RunOptions& opts,
                     SeedOutcome (*task)(const ExperimentConfig&, long, std::uint64_t)) {
  RunResult result;
  long rejections = 0;
  for (long steps : cfg.steps) {
    auto outcomes = for_each_seed(cfg.seed_count, opts.threads, [&](int i) {
      return task(cfg, steps, derive_seed(cfg.root_seed, static_cast<std::uint64_t>(i)));
    });
    for (auto& o : outcomes) {
      if (o.rejected) ++rejections;
      for (auto& r : o.rows) result.rows.push_back(std::move(r));
    }
  }
  auto summary = summarize(cfg, result.rows);
  for (auto& r : summary.rows) result.rows.push_back(std::move(r));

  const double total = static_cast<double>(cfg.seed_count) * static_cast<double>(cfg.steps.size());
  if (rejections > 0) {
    result.messages.push_back(std::to_string(rejections) + " of " + std::to_string(static_cast<long>(total)) +
                              " seed runs rejected (singular jump or blow-up)");
  }
  if (static_cast<double>(rejections) > cfg.tolerances.max_reject_fraction * total) {
    result.exit_code = kNumericalRejection;
    result.messages.push_back("rejection fraction exceeds max_reject_fraction");
    return result;
  }
  if (opts.check && summary.check_failed) {
    result.exit_code = kCheckFailed;
    for (auto& m : summary.messages) result.messages.push_back("check failed: " + m);
  }
  return result;
}

void csv_field(std::ostringstream& os, const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) {
    os << s;
    return;
  }
  os << '"';
  for (char c : s) {
    if (c == '"') os << '"';
    os << c;
  }
  os << '"';
}

std::string num(std::optional<double> v) {
  if (!v) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

}  // namespace

RunResult run_exp_verify(const ExperimentConfig& cfg, const RunOptions& opts) {
  return run_levels(cfg, opts, &exp_verify_seed);
}
RunResult run_solve(const ExperimentConfig& cfg, const RunOptions& opts) { return run_levels(cfg, opts, &solve_seed); }
RunResult run_reduce(const ExperimentConfig& cfg, const RunOptions& opts) { return run_levels(cfg, opts, &reduce_seed); }

RunResult run_converge(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (cfg.steps.size() < 3) throw ConfigError("converge needs at least three refinement levels");
  switch (cfg.target) {
    case Command::kExpVerify: return run_exp_verify(cfg, opts);
    case Command::kSolve: return run_solve(cfg, opts);
    case Command::kReduce: return run_reduce(cfg, opts);
    case Command::kConverge: break;
  }
  throw ConfigError("converge.target cannot be converge");
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (cfg.command == Command::kConverge) return run_converge(cfg, opts);
  switch (cfg.command) {
    case Command::kExpVerify: return run_exp_verify(cfg, opts);
    case Command::kSolve: return run_solve(cfg, opts);
    case Command::kReduce: return run_reduce(cfg, opts);
    case Command::kConverge: break;
  }
  throw ConfigError("unknown command");
}

std::string to_csv(const ExperimentConfig& cfg, const std::vector<ReportRow>& rows, bool include_wall_time) {
  std::ostringstream os;
  os << kCsvHeader << "\r\n";
  for (const auto& r : rows) {
    csv_field(os, cfg.hash);
    os << ',';
    csv_field(os, cfg.experiment);
    os << ',' << r.row << ',';
    csv_field(os, r.method);
    os << ',' << (r.steps ? std::to_string(*r.steps) : "") << ',' << (r.seed ? std::to_string(*r.seed) : "") << ','
       << num(r.sup_residual) << ',' << num(r.cross_method_gap) << ',' << num(r.invertibility_margin) << ','
       << r.flagged_blowups << ',' << (include_wall_time ? num(r.wall_time_ms) : std::string()) << ',';
    csv_field(os, r.note);
    os << "\r\n";
  }
  return os.str();
}

int resolve_threads(std::optional<int> flag, const ExperimentConfig& cfg) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("STOCHEX_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  if (cfg.threads) return *cfg.threads;
  return 1;
}

}  // namespace stochex::cli
