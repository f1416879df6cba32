#pragma once

#include "lockloss/action_min.hpp"
#include "lockloss/config.hpp"
#include "lockloss/cost_stats.hpp"
#include "lockloss/csv.hpp"
#include "lockloss/eikonal.hpp"
#include "lockloss/filters.hpp"
#include "lockloss/fit.hpp"
#include "lockloss/models.hpp"
#include "lockloss/mtll_analysis.hpp"
#include "lockloss/newton.hpp"
#include "lockloss/parallel.hpp"
#include "lockloss/path.hpp"
#include "lockloss/rng.hpp"
#include "lockloss/sde.hpp"
