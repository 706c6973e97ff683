#pragma once

// Umbrella header: constrained MAP tomography with design optimization.

#include "core.hpp"
#include "rng.hpp"
#include "parallel.hpp"
#include "tomo.hpp"
#include "datagen.hpp"
#include "qp.hpp"
#include "sensitivity.hpp"
#include "bayesrisk.hpp"
#include "pgd.hpp"
#include "oed.hpp"
#include "io.hpp"
