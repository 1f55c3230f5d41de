#pragma once

// Everything in one include.

#include "liveclock/errors.hpp"
#include "liveclock/clock_core.hpp"
#include "liveclock/spacetime.hpp"
#include "liveclock/channel_log.hpp"
#include "liveclock/control.hpp"
#include "liveclock/network.hpp"
#include "liveclock/scenario.hpp"
#include "liveclock/trace.hpp"
#include "liveclock/engine.hpp"
#include "liveclock/analysis.hpp"
