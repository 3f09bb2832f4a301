#pragma once

#include "ascpg/types.hpp"
#include "ascpg/oracle.hpp"
#include "ascpg/prox.hpp"
#include "ascpg/schedule.hpp"
#include "ascpg/solver.hpp"
#include "ascpg/harness.hpp"
#include "ascpg/metrics.hpp"
#include "ascpg/io.hpp"
#include "ascpg/config.hpp"
#include "ascpg/experiment.hpp"
#include "ascpg/verify.hpp"
#include "ascpg/problems/least_squares.hpp"
#include "ascpg/problems/linear.hpp"
#include "ascpg/problems/mdp.hpp"
#include "ascpg/problems/bellman.hpp"
#include "ascpg/problems/mean_variance.hpp"
#include "ascpg/problems/nonconvex.hpp"
