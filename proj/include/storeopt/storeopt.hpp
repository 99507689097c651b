#pragma once

#include "storeopt/error.hpp"
#include "storeopt/costs.hpp"
#include "storeopt/model.hpp"
#include "storeopt/solver.hpp"
#include "storeopt/verify.hpp"
#include "storeopt/oracle.hpp"
#include "storeopt/sensitivity.hpp"
#include "storeopt/rolling.hpp"
#include "storeopt/pricegen.hpp"
#include "storeopt/io.hpp"
