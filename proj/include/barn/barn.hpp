#pragma once

// Umbrella header.

#include "barn/bench.hpp"
#include "barn/callbacks.hpp"
#include "barn/classify.hpp"
#include "barn/core.hpp"
#include "barn/datasets.hpp"
#include "barn/ensemble.hpp"
#include "barn/mcmc.hpp"
#include "barn/mlp.hpp"
#include "barn/serialize.hpp"
#include "barn/stats.hpp"
#include "barn/tuning.hpp"
