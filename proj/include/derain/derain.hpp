#pragma once

// Umbrella header for the whole library.

#include "bench.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "enhance.hpp"
#include "filters.hpp"
#include "image_io.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "numerics.hpp"
#include "pipeline.hpp"
#include "rainsynth.hpp"
#include "tensor.hpp"
#include "version.hpp"
