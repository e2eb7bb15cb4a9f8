#pragma once

#include "analysis.hpp"
#include "async_engine.hpp"
#include "coin.hpp"
#include "csv.hpp"
#include "generators.hpp"
#include "network.hpp"
#include "protocol.hpp"
#include "rng.hpp"
#include "sync_engine.hpp"
