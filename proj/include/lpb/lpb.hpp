#pragma once

// Umbrella header.

#include "lpb/bfgs.hpp"
#include "lpb/cg.hpp"
#include "lpb/config.hpp"
#include "lpb/csv.hpp"
#include "lpb/error.hpp"
#include "lpb/field_io.hpp"
#include "lpb/heat.hpp"
#include "lpb/metrics.hpp"
#include "lpb/net.hpp"
#include "lpb/pgm.hpp"
#include "lpb/posterior.hpp"
#include "lpb/rng.hpp"
#include "lpb/synthetic.hpp"
#include "lpb/tape.hpp"
#include "lpb/tensor.hpp"
#include "lpb/version.hpp"
#include "lpb/wgan.hpp"
