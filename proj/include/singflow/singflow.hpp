#pragma once

// Umbrella header: the full simulation stack for singular homogeneous ODE
// systems with small-scale regularization.

#include "singflow/analysis.hpp"
#include "singflow/config.hpp"
#include "singflow/ensemble.hpp"
#include "singflow/errors.hpp"
#include "singflow/experiments.hpp"
#include "singflow/fields.hpp"
#include "singflow/integrate.hpp"
#include "singflow/io.hpp"
#include "singflow/regularize.hpp"
#include "singflow/rng.hpp"
#include "singflow/vec.hpp"
