#pragma once

#include "secl/numerics/ball_moments.hpp"
#include "secl/numerics/chi_square.hpp"
#include "secl/numerics/linalg.hpp"
#include "secl/numerics/precision.hpp"
#include "secl/numerics/quadrature.hpp"

#include "secl/model.hpp"
#include "secl/trigger.hpp"
#include "secl/estimator.hpp"
#include "secl/rate.hpp"

#include "secl/harness/experiment.hpp"
#include "secl/harness/config.hpp"
