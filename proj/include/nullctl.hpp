#pragma once

// Umbrella header for the space-time null-control solver.
#include "nullctl/errors.hpp"
#include "nullctl/geometry.hpp"
#include "nullctl/carleman_weights.hpp"
#include "nullctl/domain_mesh.hpp"
#include "nullctl/quadrature.hpp"
#include "nullctl/discretization.hpp"
#include "nullctl/fem_assembly.hpp"
#include "nullctl/saddle_solver.hpp"
#include "nullctl/state.hpp"
#include "nullctl/linear_control.hpp"
#include "nullctl/nonlinear_model.hpp"
#include "nullctl/quasi_newton.hpp"
#include "nullctl/cli_io.hpp"
