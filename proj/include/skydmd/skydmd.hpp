#pragma once

// Umbrella header: the full sky-image DMD forecasting library.

#include "skydmd/core.hpp"
#include "skydmd/decomposition.hpp"
#include "skydmd/forecast.hpp"
#include "skydmd/image_io.hpp"
#include "skydmd/io.hpp"
#include "skydmd/motion.hpp"
#include "skydmd/preprocessing.hpp"
#include "skydmd/synth.hpp"
