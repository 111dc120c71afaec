#pragma once

#include "stochex/brownian.hpp"
#include "stochex/calculus.hpp"
#include "stochex/convergence.hpp"
#include "stochex/exponential.hpp"
#include "stochex/linear_solver.hpp"
#include "stochex/paths.hpp"
#include "stochex/reduction.hpp"
#include "stochex/time_grid.hpp"
#include "stochex/types.hpp"
