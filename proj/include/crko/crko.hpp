#pragma once

#include "crko/bits.hpp"
#include "crko/oracle.hpp"
#include "crko/stats.hpp"
#include "crko/trials.hpp"
#include "crko/subversion.hpp"
#include "crko/construction.hpp"
#include "crko/simulator.hpp"
#include "crko/games.hpp"
#include "crko/analysis.hpp"
#include "crko/io.hpp"
