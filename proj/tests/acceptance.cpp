// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "config.hpp"
#include "experiments.hpp"
#include "test_support.hpp"

using namespace stochex;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> dyadic_dt(const std::vector<long>& steps) {
  std::vector<double> dt;
  for (long s : steps) dt.push_back(1.0 / static_cast<double>(s));
  return dt;
}

// Order in [0.4, 1.1] for an RMS series over dyadic levels.
void require_order(Outcome& o, const std::string& name, const std::vector<double>& dt, const std::vector<double>& err) {
  const auto est = estimate_order(dt, err);
  if (!est) {
    o.require(false, name + " order undefined");
    return;
  }
  o.require(est->order >= 0.4 && est->order <= 1.1,
            name + " order " + fmt("%.3f", est->order) + " (se " + fmt("%.3f", est->std_error) + ")");
}

void require_decreasing(Outcome& o, const std::string& name, const std::vector<double>& err) {
  bool ok = true;
  for (std::size_t i = 1; i < err.size(); ++i) ok = ok && err[i] < err[i - 1];
  o.require(ok, name + " decreasing");
}

double scale_of(const MatrixPathd& x) { return 1.0 + sup_norm(x); }

DriverSpecd shaped(Eigen::Index r, Eigen::Index c) {
  DriverSpecd s;
  s.rows = r;
  s.cols = c;
  return s;
}

// ---------------------------------------------------------------------------

Outcome integration_by_parts() {
  Outcome o;
  std::mt19937_64 rng(2718);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_int_distribution<long> steps(16, 1024);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = testing::random_grid(rng, steps(rng), 6);
    const auto n = dim(rng), p = dim(rng), m = dim(rng);
    const auto a = testing::random_path(g, n, p, rng);
    const auto b = testing::random_path(g, p, m, rng);
    const double scale = sup_norm(a) * sup_norm(b) * static_cast<double>(p);
    worst = std::max(worst, ibp_residual(a, b) / scale);
  }
  o.require(worst < 1e-12, "max residual/scale " + fmt("%.2e", worst));
  return o;
}

Outcome pure_jump_exactness() {
  Outcome o;
  double vu = 0.0, scalar = 0.0, methods = 0.0, g_identity = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto n = static_cast<Eigen::Index>(1 + seed % 3), m = static_cast<Eigen::Index>(1 + (seed / 3) % 2);
    DriverSpecd l = shaped(n, n), h = shaped(n, m);
    l.exponential_base = true;
    l.jumps = CompoundPoisson<double>{4.0, testing::normal_sizes(n, n, 0.3)};
    h.jumps = CompoundPoisson<double>{3.0, testing::normal_sizes(n, m, 1.0)};
    const auto bundle = sample_bundle<double>(1.0, 32 + static_cast<long>(seed), 1, {{"L", l}, {"H", h}}, seed);
    std::mt19937_64 rng(seed);
    LinearProblem<double> p{bundle.at("L"), l,
                            bundle.at("H") + MatrixPathd::constant(bundle.grid, testing::random_matrix(n, m, rng, 1.0)),
                            h};

    const auto pair = exponential_inverse(p.L, p.spec_L);
    const auto id = MatrixPathd::constant(bundle.grid, MatXd::Identity(n, n));
    vu = std::max(vu, sup_distance(pair.V * pair.U, id) / (1.0 + sup_norm(pair.V) * sup_norm(pair.U)));

    if (n == 1) scalar = std::max(scalar, sup_distance(scalar_doleans(p.L, p.spec_L), pair.U) / scale_of(pair.U));

    const auto d = solve_direct(p).X;
    const double s = scale_of(d);
    methods = std::max({methods, sup_distance(d, solve_theorem21(p).X) / s, sup_distance(d, solve_jacod(p).X) / s});

    g_identity = std::max(g_identity, sup_distance(jacod_G(p), g_from_leandre(p)) / scale_of(p.H));
  }
  o.require(vu < 1e-12, "(a) V U = I " + fmt("%.2e", vu));
  o.require(scalar < 1e-12, "(b) scalar vs matrix " + fmt("%.2e", scalar));
  o.require(methods < 1e-12, "(c) methods " + fmt("%.2e", methods));
  o.require(g_identity < 1e-12, "(d) G = H + [W,H] " + fmt("%.2e", g_identity));
  return o;
}

Outcome scalar_oracle() {
  Outcome o;
  const std::vector<long> levels{128, 256, 512, 1024};
  DriverSpecd spec = shaped(1, 1);
  spec.diffusion = {testing::constant(MatXd::Ones(1, 1))};
  spec.exponential_base = true;
  std::vector<double> err;
  for (long steps : levels) {
    std::vector<double> e;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      auto g = build_grid(1.0, steps);
      const auto b = sample_brownian<double>(g, 1, seed);
      const auto l = sample_driver(spec, g, b, seed);
      e.push_back(matrix_exponential(l).back()(0, 0) - std::exp(b.back()(0, 0) - 0.5));
    }
    err.push_back(testing::rms(e));
  }
  require_order(o, "exp", dyadic_dt(levels), err);
  o.require(err.back() < 0.02, "RMS at 1024 " + fmt("%.4f", err.back()) + " < 0.02");
  return o;
}

Outcome theorem_cross_validation() {
  Outcome o;
  const std::vector<long> levels{128, 256, 512, 1024};
  DriverSpecd l = shaped(2, 2), h = shaped(2, 1);
  l.exponential_base = true;
  l.drift = testing::constant((MatXd(2, 2) << 0.1, 0.0, 0.0, -0.1).finished());
  l.diffusion = {testing::constant((MatXd(2, 2) << 0.3, 0.1, 0.0, 0.2).finished()),
                 testing::constant((MatXd(2, 2) << 0.0, 0.0, 0.1, 0.2).finished())};
  l.jumps = CompoundPoisson<double>{3.0, testing::normal_sizes(2, 2, 0.2)};
  h.drift = testing::constant((MatXd(2, 1) << 1.0, 0.5).finished());
  h.diffusion = {testing::constant((MatXd(2, 1) << 0.5, 0.0).finished()),
                 testing::constant((MatXd(2, 1) << 0.2, 0.4).finished())};
  h.jumps = CompoundPoisson<double>{2.0, testing::normal_sizes(2, 1, 0.5)};
  const MatXd h0 = (MatXd(2, 1) << 1.0, -0.5).finished();

  std::vector<double> td, jd, tj, rt, rj;
  double direct_residual = 0.0;
  for (long steps : levels) {
    std::vector<double> a, b, c, r1, r2;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto bundle = sample_bundle<double>(1.0, steps, 2, {{"L", l}, {"H", h}}, seed);
      LinearProblem<double> p{bundle.at("L"), l, bundle.at("H") + MatrixPathd::constant(bundle.grid, h0), h};
      const auto d = solve_direct(p);
      const auto t = solve_theorem21(p);
      const auto j = solve_jacod(p);
      a.push_back(sup_distance(t.X, d.X));
      b.push_back(sup_distance(j.X, d.X));
      c.push_back(sup_distance(t.X, j.X));
      r1.push_back(t.residual);
      r2.push_back(j.residual);
      direct_residual = std::max(direct_residual, d.residual / scale_of(d.X));
    }
    td.push_back(testing::rms(a));
    jd.push_back(testing::rms(b));
    tj.push_back(testing::rms(c));
    rt.push_back(testing::rms(r1));
    rj.push_back(testing::rms(r2));
  }
  const auto dt = dyadic_dt(levels);
  for (const auto& [name, e] : std::vector<std::pair<std::string, std::vector<double>*>>{
           {"gap theorem21-direct", &td},
           {"gap jacod-direct", &jd},
           {"gap theorem21-jacod", &tj},
           {"residual theorem21", &rt},
           {"residual jacod", &rj}}) {
    require_decreasing(o, name, *e);
    require_order(o, name, dt, *e);
  }
  // Direct solves the discrete recursion the residual measures.
  o.require(direct_residual < 1e-12, "residual direct " + fmt("%.2e", direct_residual));
  return o;
}

// level * floor(max_{s <= t} B^1(s) / level), scaled per row.
MatrixPathd running_max_step(const MatrixPathd& brownian, const MatXd& scale, double level) {
  PathBuilder<double> out(brownian.grid_ptr());
  double running = 0.0;
  for (std::size_t k = 0; k < brownian.size(); ++k) {
    running = std::max(running, brownian.value(k)(0, 0));
    out.set(k, MatXd(scale * (level * std::floor(running / level))));
  }
  return std::move(out).finish();
}

Outcome non_semimartingale() {
  Outcome o;
  const std::vector<long> levels{128, 256, 512, 1024};
  DriverSpecd l = shaped(2, 2);
  l.exponential_base = true;
  l.diffusion = {testing::constant((MatXd(2, 2) << 0.4, 0.0, 0.1, 0.3).finished()),
                 testing::constant((MatXd(2, 2) << 0.0, 0.2, 0.2, 0.0).finished())};
  const MatXd scale = (MatXd(2, 1) << 1.0, 0.5).finished();

  std::vector<double> gap, res;
  bool refused = true;
  for (long steps : levels) {
    std::vector<double> a, r;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto bundle = sample_bundle<double>(1.0, steps, 2, {{"L", l}}, seed);
      LinearProblem<double> p{bundle.at("L"), l, running_max_step(bundle.brownian, scale, 0.1), std::nullopt};
      const auto d = solve_direct(p);
      const auto t = solve_theorem21(p);
      a.push_back(sup_distance(t.X, d.X));
      r.push_back(t.residual);
      if (seed == 0) {
        try {
          solve_jacod(p);
          refused = false;
        } catch (const std::invalid_argument&) {
        }
      }
    }
    gap.push_back(testing::rms(a));
    res.push_back(testing::rms(r));
  }
  const auto dt = dyadic_dt(levels);
  require_decreasing(o, "gap theorem21-direct", gap);
  require_order(o, "gap theorem21-direct", dt, gap);
  require_order(o, "residual theorem21", dt, res);
  o.require(refused, "jacod refuses H without a spec");
  return o;
}

Outcome reduction_oracle() {
  Outcome o;
  const std::vector<long> levels{128, 256, 512, 1024};
  const double a = 0.5, sigma = 0.3;
  NonlinearProblem<double> p;
  p.n = 1;
  p.C = testing::constant(MatXd::Constant(1, 1, sigma));
  p.f = [a](double, const VecXd& x) { return VecXd(a * x); };
  p.x0 = VecXd::Ones(1);
  std::vector<double> e_red, e_dir, gap;
  for (long steps : levels) {
    std::vector<double> r, d, x;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      auto g = build_grid(1.0, steps);
      const auto b = sample_brownian<double>(g, 1, seed);
      const double exact = std::exp((a - sigma * sigma / 2.0) + sigma * b.back()(0, 0));
      const auto red = solve_by_reduction(p, b).X;
      const auto dir = solve_nonlinear_direct(p, b).path;
      r.push_back(red.back()(0, 0) - exact);
      d.push_back(dir.back()(0, 0) - exact);
      x.push_back(sup_distance(red, dir));
    }
    e_red.push_back(testing::rms(r));
    e_dir.push_back(testing::rms(d));
    gap.push_back(testing::rms(x));
  }
  const auto dt = dyadic_dt(levels);
  require_order(o, "reduction", dt, e_red);
  require_order(o, "direct", dt, e_dir);
  o.require(gap.back() < 1e-2, "cross-route RMS gap at 1024 " + fmt("%.2e", gap.back()));
  return o;
}

Outcome continuous_formula() {
  Outcome o;
  std::mt19937_64 rng(31);
  double worst = 0.0;
  bool refused = false;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(seed % 3), m = 1 + static_cast<Eigen::Index>(seed % 2);
    DriverSpecd l = shaped(n, n), h = shaped(n, m);
    l.exponential_base = true;
    l.drift = testing::constant(testing::random_matrix(n, n, rng, 0.2));
    l.diffusion = {testing::constant(testing::random_matrix(n, n, rng, 0.3)),
                   [n](double t) { return MatXd(MatXd::Identity(n, n) * 0.2 * t); }};
    h.drift = testing::constant(testing::random_matrix(n, m, rng, 0.5));
    h.diffusion = {testing::constant(testing::random_matrix(n, m, rng, 0.4)),
                   testing::constant(testing::random_matrix(n, m, rng, 0.4))};
    const auto bundle = sample_bundle<double>(1.0, 256, 2, {{"L", l}, {"H", h}}, seed);
    LinearProblem<double> p{bundle.at("L"), l,
                            bundle.at("H") + MatrixPathd::constant(bundle.grid, testing::random_matrix(n, m, rng, 1.0)),
                            h};
    const auto c = solve_continuous(p).X;
    worst = std::max(worst, sup_distance(c, solve_jacod(p).X) / scale_of(c));
    if (seed == 0) {
      auto jumpy = l;
      jumpy.jumps = ExplicitJumps<double>{{{0.5, MatXd::Constant(n, n, 0.1)}}};
      const auto jb = sample_bundle<double>(1.0, 64, 2, {{"L", jumpy}, {"H", h}}, seed);
      try {
        solve_continuous(LinearProblem<double>{jb.at("L"), jumpy, jb.at("H"), h});
      } catch (const std::invalid_argument&) {
        refused = true;
      }
    }
  }
  o.require(worst < 1e-10, "max gap/scale " + fmt("%.2e", worst));
  o.require(refused, "rejects jumps");
  return o;
}

Outcome determinism() {
  Outcome o;
  const std::vector<std::string> configs{"exp_verify_pure_jump", "solve_mixed", "reduce_linear",
                                         "solve_non_semimartingale"};
  for (const auto& name : configs) {
    const auto cfg = cli::load_config(std::string(STOCHEX_CONFIG_DIR) + "/" + name + ".yaml");
    const auto first = cli::to_csv(cfg, cli::run_experiment(cfg, {false, 1}).rows, false);
    const auto second = cli::to_csv(cfg, cli::run_experiment(cfg, {false, 1}).rows, false);
    const auto threaded = cli::to_csv(cfg, cli::run_experiment(cfg, {false, 4}).rows, false);
    o.require(first == second && first == threaded, name);
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"integration by parts", 5, integration_by_parts},
      {"pure-jump exactness", 10, pure_jump_exactness},
      {"scalar closed-form oracle", 30, scalar_oracle},
      {"three-method cross-validation", 60, theorem_cross_validation},
      {"non-semimartingale H", 30, non_semimartingale},
      {"reduction oracle", 60, reduction_oracle},
      {"continuous formula vs jacod", 10, continuous_formula},
      {"CLI determinism", 10, determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    o.require(secs < criteria[i].budget_s,
              "runtime " + fmt("%.2f", secs) + " s < " + fmt("%.0f", criteria[i].budget_s) + " s");
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    if (!o.pass) ++failures;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
