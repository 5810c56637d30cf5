#pragma once

#include "annotate.hpp"
#include "composer.hpp"
#include "config.hpp"
#include "detector_math.hpp"
#include "errors.hpp"
#include "evalkit.hpp"
#include "geometry.hpp"
#include "image_io.hpp"
#include "meshio.hpp"
#include "pipeline.hpp"
#include "renderer.hpp"
#include "seed.hpp"
