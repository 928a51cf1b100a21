#pragma once

#include "mctrack/alerts.hpp"
#include "mctrack/chain_core.hpp"
#include "mctrack/ctmc_uniform.hpp"
#include "mctrack/error.hpp"
#include "mctrack/geo_map.hpp"
#include "mctrack/guidance.hpp"
#include "mctrack/io.hpp"
#include "mctrack/rng.hpp"
#include "mctrack/stochastic_matrix.hpp"
#include "mctrack/svg_plot.hpp"
#include "mctrack/walk_profiles.hpp"
