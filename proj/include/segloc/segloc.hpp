#pragma once

#include "segloc/baselines.hpp"
#include "segloc/bench.hpp"
#include "segloc/error.hpp"
#include "segloc/geometry.hpp"
#include "segloc/io.hpp"
#include "segloc/localizer.hpp"
#include "segloc/parallel.hpp"
#include "segloc/propagation.hpp"
#include "segloc/segreg.hpp"
