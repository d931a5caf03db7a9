#pragma once

#include "geobalance/core.hpp"
#include "geobalance/flows.hpp"
#include "geobalance/normalform.hpp"
#include "geobalance/integrators.hpp"
#include "geobalance/hpm.hpp"
#include "geobalance/diagnostics.hpp"
#include "geobalance/experiments.hpp"
