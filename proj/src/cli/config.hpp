#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochex/linear_solver.hpp"
#include "stochex/paths.hpp"

namespace stochex::cli {

// Malformed or inconsistent configuration. `what()` carries the line and the
// offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { kExpVerify, kSolve, kReduce, kConverge };

std::string command_name(Command c);
Command parse_command(const std::string& name);

// H given as a function of the sampled Brownian path instead of a driver spec:
// H(t_k) = scale * level * floor(max_{j<=k} B^c(t_j) / level).
struct RunningMaxStep {
  int component = 0;  // zero-based
  double level = 0.1;
  MatXd scale;
};

struct DriverConfig {
  DriverSpecd spec;
  std::optional<RunningMaxStep> functional;  // set => no spec semantics
  bool has_jump_law = false;
};

using VectorField = std::function<VecXd(double, const VecXd&)>;

struct ReduceConfig {
  std::string field_name;
  double field_a = 0.0;  // "linear a", "cubic-damped a,b"
  double field_b = 0.0;
  double field_r = 0.0;  // "logistic r,K"
  double field_K = 1.0;
  VectorField field;
  std::function<MatXd(double)> C;
  std::optional<MatXd> C_constant;  // set when C is time-independent
  VecXd x0;
  double lipschitz = 0.0;
};

struct Tolerances {
  double machine_zero = 1e-10;
  double order_min = 0.4;
  double order_max = 1.1;
  double conditioning_warning = 1e-3;
  double blowup_bound = 1e8;
  double max_reject_fraction = 0.1;
};

struct ExperimentConfig {
  Command command = Command::kSolve;
  Command target = Command::kSolve;  // what actually runs; differs from command for converge
  std::string experiment = "experiment";
  double horizon = 1.0;
  std::vector<long> steps;
  int seed_count = 1;
  std::uint64_t root_seed = 0;
  int brownian_dim = 0;
  std::optional<DriverConfig> L;
  std::optional<DriverConfig> H;
  std::vector<Method> methods;
  std::optional<ReduceConfig> reduce;
  Tolerances tolerances;
  std::optional<int> threads;
  std::string hash;  // FNV-1a 64 of the config text, hex
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

std::string fnv1a_hex(const std::string& text);

// Built-in vector fields, componentwise:
//   linear        f(x) = a x
//   logistic      f(x) = r x (1 - x / K)
//   cubic-damped  f(x) = a x - b x^3
VectorField make_vector_field(const std::string& name, double a, double b, double r, double K);

}  // namespace stochex::cli
