#pragma once

#include "cacc/units.hpp"
#include "cacc/dynamics.hpp"
#include "cacc/car_following.hpp"
#include "cacc/platooning.hpp"
#include "cacc/metrics.hpp"
#include "cacc/scenario.hpp"
#include "cacc/engine.hpp"
#include "cacc/scenario_io.hpp"
