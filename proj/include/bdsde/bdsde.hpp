#pragma once

// Umbrella header: numerical study of backward doubly stochastic differential
// equations driven by a Brownian pair, comparing the exact-noise reference
// scheme against its piecewise-linear-noise counterpart.

#include "brownian.hpp"
#include "convergence.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "interpolation.hpp"
#include "parallel.hpp"
#include "problem.hpp"
#include "regression.hpp"
#include "report.hpp"
#include "solver.hpp"
