#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace stochex::cli {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& msg) {
  std::ostringstream os;
  const auto mark = node.Mark();
  if (mark.line >= 0) os << "line " << mark.line + 1 << ", column " << mark.column + 1 << ": ";
  os << field << ": " << msg;
  throw ConfigError(os.str());
}

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail(node, where, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(kv.first, where + "." + key, "unknown key");
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node || !node.IsScalar()) fail(node, field, "expected a scalar value");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, field, "cannot convert '" + node.Scalar() + "'");
  }
}

template <typename T>
T required(const YAML::Node& parent, const std::string& key, const std::string& where) {
  const auto n = parent[key];
  if (!n) fail(parent, where + "." + key, "missing required key");
  return scalar<T>(n, where + "." + key);
}

template <typename T>
T optional_or(const YAML::Node& parent, const std::string& key, const std::string& where, T fallback) {
  const auto n = parent[key];
  return n ? scalar<T>(n, where + "." + key) : fallback;
}

double finite(const YAML::Node& node, const std::string& field) {
  const double v = scalar<double>(node, field);
  if (!std::isfinite(v)) fail(node, field, "must be finite");
  return v;
}

// A scalar fills the whole matrix; a flat list fills a row or column vector;
// otherwise a list of rows of the exact shape.
MatXd matrix(const YAML::Node& node, const std::string& field, Eigen::Index rows, Eigen::Index cols) {
  if (!node) fail(node, field, "missing matrix");
  if (node.IsScalar()) return MatXd::Constant(rows, cols, finite(node, field));
  if (!node.IsSequence()) fail(node, field, "expected a number or a list");
  const bool flat = node.size() > 0 && node[0].IsScalar();
  if (flat) {
    if (rows != 1 && cols != 1) fail(node, field, "flat list only allowed for vectors");
    if (static_cast<Eigen::Index>(node.size()) != rows * cols)
      fail(node, field, "expected " + std::to_string(rows * cols) + " entries");
    MatXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows * cols; ++i) m(i) = finite(node[static_cast<std::size_t>(i)], field);
    return m;
  }
  if (static_cast<Eigen::Index>(node.size()) != rows) fail(node, field, "expected " + std::to_string(rows) + " rows");
  MatXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = node[static_cast<std::size_t>(i)];
    if (!row.IsSequence() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(row, field, "row " + std::to_string(i + 1) + " must have " + std::to_string(cols) + " entries");
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = finite(row[static_cast<std::size_t>(j)], field);
  }
  return m;
}

struct Integrand {
  std::function<MatXd(double)> fn;  // empty: zero
  std::optional<MatXd> constant;
};

Integrand integrand(const YAML::Node& node, const std::string& where, Eigen::Index rows, Eigen::Index cols) {
  if (!node || node.IsNull()) return {};
  const auto type = required<std::string>(node, "type", where);
  if (type == "zero") {
    check_keys(node, where, {"type"});
    return {{}, MatXd::Zero(rows, cols)};
  }
  if (type == "constant") {
    check_keys(node, where, {"type", "value"});
    MatXd v = matrix(node["value"], where + ".value", rows, cols);
    return {[v](double) { return v; }, v};
  }
  if (type == "affine") {
    check_keys(node, where, {"type", "value", "slope"});
    MatXd v = matrix(node["value"], where + ".value", rows, cols);
    MatXd s = matrix(node["slope"], where + ".slope", rows, cols);
    return {[v, s](double t) -> MatXd { return v + t * s; }, std::nullopt};
  }
  if (type == "sinusoid") {
    check_keys(node, where, {"type", "amplitude", "frequency", "phase"});
    MatXd a = matrix(node["amplitude"], where + ".amplitude", rows, cols);
    const double w = required<double>(node, "frequency", where);
    const double ph = optional_or<double>(node, "phase", where, 0.0);
    return {[a, w, ph](double t) -> MatXd { return a * std::sin(w * t + ph); }, std::nullopt};
  }
  fail(node["type"], where + ".type", "unknown integrand type '" + type + "' (zero|constant|affine|sinusoid)");
}

JumpLaw<double> jump_law(const YAML::Node& node, const std::string& where, Eigen::Index rows, Eigen::Index cols) {
  if (!node || node.IsNull()) return NoJumps<double>{};
  const auto type = required<std::string>(node, "type", where);
  if (type == "none") {
    check_keys(node, where, {"type"});
    return NoJumps<double>{};
  }
  if (type == "explicit") {
    check_keys(node, where, {"type", "list"});
    const auto list = node["list"];
    if (!list || !list.IsSequence()) fail(node, where + ".list", "expected a list of {time, value}");
    ExplicitJumps<double> e;
    for (const auto& item : list) {
      check_keys(item, where + ".list[]", {"time", "value"});
      e.jumps.emplace_back(required<double>(item, "time", where + ".list[]"),
                           matrix(item["value"], where + ".list[].value", rows, cols));
    }
    return e;
  }
  if (type == "poisson") {
    check_keys(node, where, {"type", "rate", "size"});
    CompoundPoisson<double> cp;
    cp.rate = required<double>(node, "rate", where);
    if (!(cp.rate >= 0.0) || !std::isfinite(cp.rate)) fail(node["rate"], where + ".rate", "must be finite and >= 0");
    const auto size = node["size"];
    const std::string sw = where + ".size";
    if (!size) fail(node, sw, "missing jump-size law");
    const auto st = required<std::string>(size, "type", sw);
    if (st == "constant") {
      check_keys(size, sw, {"type", "value"});
      MatXd v = matrix(size["value"], sw + ".value", rows, cols);
      cp.size = [v](std::mt19937_64&) { return v; };
    } else if (st == "normal") {
      check_keys(size, sw, {"type", "mean", "stddev"});
      MatXd mean = size["mean"] ? matrix(size["mean"], sw + ".mean", rows, cols) : MatXd::Zero(rows, cols);
      const double sd = required<double>(size, "stddev", sw);
      if (!(sd >= 0.0)) fail(size["stddev"], sw + ".stddev", "must be >= 0");
      cp.size = [mean, sd](std::mt19937_64& rng) -> MatXd {
        std::normal_distribution<double> nd(0.0, sd);
        MatXd m = mean;
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) += nd(rng);
        return m;
      };
    } else if (st == "uniform") {
      check_keys(size, sw, {"type", "low", "high"});
      const double lo = required<double>(size, "low", sw);
      const double hi = required<double>(size, "high", sw);
      if (!(lo < hi)) fail(size, sw, "low must be below high");
      cp.size = [lo, hi, rows, cols](std::mt19937_64& rng) -> MatXd {
        std::uniform_real_distribution<double> ud(lo, hi);
        MatXd m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = ud(rng);
        return m;
      };
    } else {
      fail(size["type"], sw + ".type", "unknown jump-size law '" + st + "' (constant|normal|uniform)");
    }
    return cp;
  }
  fail(node["type"], where + ".type", "unknown jump law '" + type + "' (none|explicit|poisson)");
}

DriverConfig driver(const YAML::Node& node, const std::string& where, int brownian_dim, bool exponential_base) {
  if (!node.IsMap()) fail(node, where, "expected a mapping");
  DriverConfig out;
  const auto type = optional_or<std::string>(node, "type", where, "driver");
  const auto rows = required<long>(node, "rows", where);
  const auto cols = required<long>(node, "cols", where);
  if (rows <= 0 || cols <= 0) fail(node, where, "rows and cols must be positive");
  out.spec.rows = rows;
  out.spec.cols = cols;
  if (type == "running-max-step") {
    check_keys(node, where, {"type", "rows", "cols", "component", "level", "scale"});
    RunningMaxStep f;
    f.component = optional_or<int>(node, "component", where, 1) - 1;
    if (f.component < 0 || f.component >= brownian_dim)
      fail(node, where + ".component", "must be in 1.." + std::to_string(brownian_dim));
    f.level = required<double>(node, "level", where);
    if (!(f.level > 0.0)) fail(node["level"], where + ".level", "must be positive");
    f.scale = node["scale"] ? matrix(node["scale"], where + ".scale", rows, cols) : MatXd::Ones(rows, cols);
    out.functional = f;
    return out;
  }
  if (type != "driver") fail(node["type"], where + ".type", "unknown driver type '" + type + "' (driver|running-max-step)");
  check_keys(node, where, {"type", "rows", "cols", "drift", "diffusion", "jumps"});
  out.spec.drift = integrand(node["drift"], where + ".drift", rows, cols).fn;
  if (const auto diff = node["diffusion"]) {
    if (!diff.IsSequence()) fail(diff, where + ".diffusion", "expected one integrand per Brownian component");
    if (static_cast<int>(diff.size()) != brownian_dim)
      fail(diff, where + ".diffusion",
           "has " + std::to_string(diff.size()) + " entries, brownian_dim is " + std::to_string(brownian_dim));
    for (std::size_t r = 0; r < diff.size(); ++r)
      out.spec.diffusion.push_back(
          integrand(diff[r], where + ".diffusion[" + std::to_string(r + 1) + "]", rows, cols).fn);
  }
  out.spec.jumps = jump_law(node["jumps"], where + ".jumps", rows, cols);
  out.spec.exponential_base = exponential_base;
  out.has_jump_law = out.spec.has_jump_law();
  try {
    out.spec.validate();
  } catch (const std::exception& e) {
    fail(node, where, e.what());
  }
  if (auto* e = std::get_if<ExplicitJumps<double>>(&out.spec.jumps)) {
    for (const auto& [t, j] : e->jumps) {
      (void)j;
      if (!(t > 0.0)) fail(node["jumps"], where + ".jumps", "jump times must be positive");
    }
  }
  return out;
}

Method parse_method(const YAML::Node& node) {
  const auto m = scalar<std::string>(node, "methods[]");
  if (m == "direct") return Method::kDirect;
  if (m == "theorem21") return Method::kTheorem21;
  if (m == "jacod") return Method::kJacod;
  if (m == "continuous") return Method::kContinuous;
  fail(node, "methods[]", "unknown method '" + m + "' (direct|theorem21|jacod|continuous)");
}

ReduceConfig reduce_section(const YAML::Node& node) {
  const std::string where = "reduce";
  check_keys(node, where, {"field", "C", "x0", "lipschitz"});
  ReduceConfig rc;
  const auto x0 = node["x0"];
  if (!x0 || !x0.IsSequence() || x0.size() == 0) fail(node, where + ".x0", "expected a non-empty list");
  rc.x0.resize(static_cast<Eigen::Index>(x0.size()));
  for (std::size_t i = 0; i < x0.size(); ++i) rc.x0(static_cast<Eigen::Index>(i)) = finite(x0[i], where + ".x0");
  const auto n = rc.x0.size();

  const auto field = node["field"];
  if (!field) fail(node, where + ".field", "missing vector field");
  rc.field_name = required<std::string>(field, "name", where + ".field");
  const std::string fw = where + ".field";
  if (rc.field_name == "linear") {
    check_keys(field, fw, {"name", "a"});
    rc.field_a = required<double>(field, "a", fw);
  } else if (rc.field_name == "logistic") {
    check_keys(field, fw, {"name", "r", "K"});
    rc.field_r = required<double>(field, "r", fw);
    rc.field_K = required<double>(field, "K", fw);
    if (rc.field_K == 0.0) fail(field["K"], fw + ".K", "must be nonzero");
  } else if (rc.field_name == "cubic-damped") {
    check_keys(field, fw, {"name", "a", "b"});
    rc.field_a = required<double>(field, "a", fw);
    rc.field_b = required<double>(field, "b", fw);
  } else {
    fail(field["name"], fw + ".name", "unknown vector field '" + rc.field_name + "' (linear|logistic|cubic-damped)");
  }
  rc.field = make_vector_field(rc.field_name, rc.field_a, rc.field_b, rc.field_r, rc.field_K);
  auto c = integrand(node["C"], where + ".C", n, n);
  rc.C = c.fn;
  rc.C_constant = c.constant;
  if (!node["C"]) rc.C_constant = MatXd::Zero(n, n);
  rc.lipschitz = optional_or<double>(node, "lipschitz", where, 0.0);
  return rc;
}

}  // namespace

std::string command_name(Command c) {
  switch (c) {
    case Command::kExpVerify: return "exp-verify";
    case Command::kSolve: return "solve";
    case Command::kReduce: return "reduce";
    case Command::kConverge: return "converge";
  }
  return "?";
}

Command parse_command(const std::string& name) {
  if (name == "exp-verify") return Command::kExpVerify;
  if (name == "solve") return Command::kSolve;
  if (name == "reduce") return Command::kReduce;
  if (name == "converge") return Command::kConverge;
  throw ConfigError("unknown command '" + name + "' (exp-verify|solve|reduce|converge)");
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

VectorField make_vector_field(const std::string& name, double a, double b, double r, double K) {
  if (name == "linear") return [a](double, const VecXd& x) -> VecXd { return a * x; };
  if (name == "logistic")
    return [r, K](double, const VecXd& x) -> VecXd { return (r * x.array() * (1.0 - x.array() / K)).matrix(); };
  if (name == "cubic-damped")
    return [a, b](double, const VecXd& x) -> VecXd { return (a * x.array() - b * x.array().cube()).matrix(); };
  throw ConfigError("unknown vector field '" + name + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  if (!root || !root.IsMap()) throw ConfigError("config must be a mapping at top level");
  check_keys(root, "config",
             {"command", "experiment", "horizon", "steps", "seeds", "brownian_dim", "drivers", "methods", "reduce",
              "converge", "tolerances", "threads"});

  ExperimentConfig cfg;
  cfg.hash = fnv1a_hex(text);
  try {
    cfg.command = parse_command(required<std::string>(root, "command", "config"));
  } catch (const ConfigError& e) {
    fail(root["command"], "command", e.what());
  }
  cfg.target = cfg.command;
  if (cfg.command == Command::kConverge) {
    const auto cv = root["converge"];
    if (!cv) fail(root, "converge", "converge command needs a converge.target");
    check_keys(cv, "converge", {"target"});
    const auto t = required<std::string>(cv, "target", "converge");
    if (t == "converge") fail(cv["target"], "converge.target", "cannot be converge");
    try {
      cfg.target = parse_command(t);
    } catch (const ConfigError& e) {
      fail(cv["target"], "converge.target", e.what());
    }
  } else if (root["converge"]) {
    fail(root["converge"], "converge", "only valid with command: converge");
  }

  cfg.experiment = optional_or<std::string>(root, "experiment", "config", command_name(cfg.target));
  cfg.horizon = optional_or<double>(root, "horizon", "config", 1.0);
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) fail(root["horizon"], "horizon", "must be positive");

  const auto steps = root["steps"];
  if (!steps) fail(root, "steps", "missing required key");
  if (steps.IsScalar()) {
    cfg.steps.push_back(scalar<long>(steps, "steps"));
  } else if (steps.IsSequence()) {
    for (const auto& s : steps) cfg.steps.push_back(scalar<long>(s, "steps[]"));
  } else {
    fail(steps, "steps", "expected an integer or a list");
  }
  if (cfg.steps.empty()) fail(steps, "steps", "must not be empty");
  for (std::size_t i = 0; i < cfg.steps.size(); ++i) {
    if (cfg.steps[i] <= 0) fail(steps, "steps", "must be positive");
    if (i > 0 && cfg.steps[i] <= cfg.steps[i - 1]) fail(steps, "steps", "must be strictly increasing");
  }
  if (cfg.command == Command::kConverge && cfg.steps.size() < 3)
    fail(steps, "steps", "converge needs at least three refinement levels");

  const auto seeds = root["seeds"];
  if (seeds) {
    check_keys(seeds, "seeds", {"count", "root"});
    cfg.seed_count = optional_or<int>(seeds, "count", "seeds", 1);
    cfg.root_seed = optional_or<std::uint64_t>(seeds, "root", "seeds", 0);
    if (cfg.seed_count < 1) fail(seeds["count"], "seeds.count", "must be at least 1");
  }
  if (root["threads"]) {
    cfg.threads = scalar<int>(root["threads"], "threads");
    if (*cfg.threads < 1) fail(root["threads"], "threads", "must be at least 1");
  }

  if (const auto tol = root["tolerances"]) {
    check_keys(tol, "tolerances",
               {"machine_zero", "order_min", "order_max", "conditioning_warning", "blowup_bound",
                "max_reject_fraction"});
    auto& t = cfg.tolerances;
    t.machine_zero = optional_or(tol, "machine_zero", "tolerances", t.machine_zero);
    t.order_min = optional_or(tol, "order_min", "tolerances", t.order_min);
    t.order_max = optional_or(tol, "order_max", "tolerances", t.order_max);
    t.conditioning_warning = optional_or(tol, "conditioning_warning", "tolerances", t.conditioning_warning);
    t.blowup_bound = optional_or(tol, "blowup_bound", "tolerances", t.blowup_bound);
    t.max_reject_fraction = optional_or(tol, "max_reject_fraction", "tolerances", t.max_reject_fraction);
    if (!(t.order_min < t.order_max)) fail(tol, "tolerances", "order_min must be below order_max");
  }

  const bool linear = cfg.target == Command::kExpVerify || cfg.target == Command::kSolve;
  if (linear) {
    if (root["reduce"]) fail(root["reduce"], "reduce", "only valid for the reduce command");
    cfg.brownian_dim = optional_or<int>(root, "brownian_dim", "config", 1);
    if (cfg.brownian_dim < 1) fail(root["brownian_dim"], "brownian_dim", "must be at least 1");
    const auto drivers = root["drivers"];
    if (!drivers) fail(root, "drivers", "missing required key");
    check_keys(drivers, "drivers", {"L", "H"});
    if (!drivers["L"]) fail(drivers, "drivers.L", "missing required key");
    cfg.L = driver(drivers["L"], "drivers.L", cfg.brownian_dim, true);
    if (cfg.L->functional) fail(drivers["L"], "drivers.L", "L must be a driver spec");
    if (cfg.L->spec.rows != cfg.L->spec.cols) fail(drivers["L"], "drivers.L", "L must be square");
    if (cfg.target == Command::kExpVerify) {
      if (drivers["H"]) fail(drivers["H"], "drivers.H", "not used by exp-verify");
      if (root["methods"]) fail(root["methods"], "methods", "not used by exp-verify");
    } else {
      if (!drivers["H"]) fail(drivers, "drivers.H", "missing required key");
      cfg.H = driver(drivers["H"], "drivers.H", cfg.brownian_dim, false);
      if (cfg.H->spec.rows != cfg.L->spec.rows)
        fail(drivers["H"], "drivers.H.rows", "must equal the dimension of L");
      if (const auto methods = root["methods"]) {
        if (!methods.IsSequence()) fail(methods, "methods", "expected a list");
        for (const auto& m : methods) cfg.methods.push_back(parse_method(m));
      } else {
        cfg.methods = {Method::kDirect, Method::kTheorem21};
        if (!cfg.H->functional) cfg.methods.push_back(Method::kJacod);
      }
      for (Method m : cfg.methods) {
        if ((m == Method::kJacod || m == Method::kContinuous) && cfg.H->functional)
          fail(root["methods"], "methods", std::string(method_name(m)) + " needs H given as a driver spec");
        if (m == Method::kContinuous && (cfg.L->has_jump_law || cfg.H->has_jump_law))
          fail(root["methods"], "methods", "continuous needs L and H without jumps");
      }
    }
  } else {
    if (root["drivers"]) fail(root["drivers"], "drivers", "not used by reduce");
    if (root["methods"]) fail(root["methods"], "methods", "not used by reduce");
    const auto rd = root["reduce"];
    if (!rd) fail(root, "reduce", "missing required key");
    cfg.reduce = reduce_section(rd);
    cfg.brownian_dim = static_cast<int>(cfg.reduce->x0.size());
    if (root["brownian_dim"] && scalar<int>(root["brownian_dim"], "brownian_dim") != cfg.brownian_dim)
      fail(root["brownian_dim"], "brownian_dim", "must equal the state dimension for reduce");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace stochex::cli
