#pragma once

#include "agrifin/analytic.hpp"
#include "agrifin/clearing.hpp"
#include "agrifin/errors.hpp"
#include "agrifin/expectation.hpp"
#include "agrifin/metrics.hpp"
#include "agrifin/model.hpp"
#include "agrifin/sweep.hpp"
#include "agrifin/validation.hpp"
