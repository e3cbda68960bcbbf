#pragma once

#include "mghc/config.hpp"
#include "mghc/csv.hpp"
#include "mghc/engine.hpp"
#include "mghc/errors.hpp"
#include "mghc/genset.hpp"
#include "mghc/netmodel.hpp"
#include "mghc/pvunit.hpp"
#include "mghc/rk4.hpp"
#include "mghc/stability.hpp"
#include "mghc/svg.hpp"
#include "mghc/sweep.hpp"
