#pragma once

#include "femtoho/capacity_ledger.hpp"
#include "femtoho/cli.hpp"
#include "femtoho/config.hpp"
#include "femtoho/core.hpp"
#include "femtoho/engine.hpp"
#include "femtoho/mobility.hpp"
#include "femtoho/oracle.hpp"
#include "femtoho/random.hpp"
#include "femtoho/sweep.hpp"
#include "femtoho/traffic.hpp"
