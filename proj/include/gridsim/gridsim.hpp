#pragma once

#include <gridsim/engine.hpp>
#include <gridsim/errors.hpp>
#include <gridsim/failure_injection.hpp>
#include <gridsim/reliability.hpp>
#include <gridsim/rng.hpp>
#include <gridsim/scenario_file.hpp>
#include <gridsim/sim_core.hpp>
#include <gridsim/weibull.hpp>
