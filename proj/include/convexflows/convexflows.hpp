#pragma once

// Convex flow solver: maximize a concave utility of net flows over a
// hypergraph whose edges carry concave gains or convex allowable-flow sets,
// by dual decomposition with parallel per-edge subproblems.

#include "convexflows/diagnostics.hpp"
#include "convexflows/edges.hpp"
#include "convexflows/generators.hpp"
#include "convexflows/incidence.hpp"
#include "convexflows/io.hpp"
#include "convexflows/objectives.hpp"
#include "convexflows/problem.hpp"
#include "convexflows/rng.hpp"
#include "convexflows/solver.hpp"
