#pragma once

#include "extremis/brute_force.hpp"
#include "extremis/contour.hpp"
#include "extremis/env_model.hpp"
#include "extremis/error.hpp"
#include "extremis/experiment.hpp"
#include "extremis/extreme_fit.hpp"
#include "extremis/gp.hpp"
#include "extremis/kde.hpp"
#include "extremis/narx.hpp"
#include "extremis/optimize.hpp"
#include "extremis/parallel.hpp"
#include "extremis/random.hpp"
#include "extremis/response_sim.hpp"
#include "extremis/return_values.hpp"
#include "extremis/seq_sampling.hpp"
#include "extremis/special.hpp"
#include "extremis/version.hpp"
