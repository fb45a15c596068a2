#pragma once

#include "singtime/config.hpp"
#include "singtime/criticality.hpp"
#include "singtime/errors.hpp"
#include "singtime/experiments.hpp"
#include "singtime/fractal.hpp"
#include "singtime/noise.hpp"
#include "singtime/rng.hpp"
#include "singtime/spde.hpp"
#include "singtime/spectral.hpp"
