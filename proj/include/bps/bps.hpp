#pragma once

// Umbrella header: Bernoulli prediction sets, their calibration, the APS
// baseline, credal-set geometry, and the evaluation suite.

#include "bps/calibrate.hpp"
#include "bps/core.hpp"
#include "bps/credal.hpp"
#include "bps/data.hpp"
#include "bps/lp.hpp"
#include "bps/metrics.hpp"
#include "bps/rng.hpp"
#include "bps/sets.hpp"
