#pragma once

#include "xemap/annotations.hpp"
#include "xemap/errors.hpp"
#include "xemap/fusion.hpp"
#include "xemap/geometry.hpp"
#include "xemap/hmsa.hpp"
#include "xemap/manifest.hpp"
#include "xemap/map.hpp"
#include "xemap/map_io.hpp"
#include "xemap/mcmg.hpp"
#include "xemap/metrics.hpp"
#include "xemap/parallel.hpp"
#include "xemap/png_io.hpp"
#include "xemap/tensor.hpp"
#include "xemap/weights.hpp"
#include "xemap/xten.hpp"
