#pragma once

// Umbrella header.

#include "decomp/benchmark.hpp"
#include "decomp/closed_form.hpp"
#include "decomp/convex_solver.hpp"
#include "decomp/lbfgs.hpp"
#include "decomp/linalg.hpp"
#include "decomp/matrix_io.hpp"
#include "decomp/noconv.hpp"
#include "decomp/norms.hpp"
#include "decomp/objectives.hpp"
#include "decomp/prox.hpp"
#include "decomp/rng.hpp"
#include "decomp/rounding.hpp"
#include "decomp/version.hpp"
