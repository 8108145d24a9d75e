#pragma once

#include "fisher/eg.hpp"
#include "fisher/eg_solvers.hpp"
#include "fisher/instances.hpp"
#include "fisher/market.hpp"
#include "fisher/metrics.hpp"
#include "fisher/pr_solvers.hpp"
#include "fisher/rng.hpp"
#include "fisher/run.hpp"
#include "fisher/simplex.hpp"
