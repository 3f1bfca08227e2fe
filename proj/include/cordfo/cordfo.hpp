#pragma once

#include "cordfo/rng.hpp"
#include "cordfo/stats.hpp"
#include "cordfo/problem.hpp"
#include "cordfo/problems.hpp"
#include "cordfo/fd.hpp"
#include "cordfo/corcfd.hpp"
#include "cordfo/sampling.hpp"
#include "cordfo/linesearch.hpp"
#include "cordfo/optim.hpp"
#include "cordfo/bench.hpp"
#include "cordfo/config.hpp"
#include "cordfo/experiment.hpp"
