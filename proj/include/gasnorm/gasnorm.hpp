#pragma once

#include "gasnorm/datagen.hpp"
#include "gasnorm/errors.hpp"
#include "gasnorm/eval.hpp"
#include "gasnorm/forecaster.hpp"
#include "gasnorm/gas_filter.hpp"
#include "gasnorm/lorenz_study.hpp"
#include "gasnorm/matrix.hpp"
#include "gasnorm/normalization.hpp"
#include "gasnorm/optim.hpp"
#include "gasnorm/param_fit.hpp"
#include "gasnorm/timeseries.hpp"
