#pragma once

// Numerical core. io.hpp and experiment.hpp additionally need json.hpp.

#include "slnet/types.hpp"
#include "slnet/kernels.hpp"
#include "slnet/regressor.hpp"
#include "slnet/estimator.hpp"
#include "slnet/optimizer.hpp"
#include "slnet/evidence.hpp"
#include "slnet/slr.hpp"
#include "slnet/simulation.hpp"
#include "slnet/metrics.hpp"
