#pragma once

#include "ddepth/boxgeom.hpp"
#include "ddepth/camera.hpp"
#include "ddepth/combiner.hpp"
#include "ddepth/confidence.hpp"
#include "ddepth/depthsolver.hpp"
#include "ddepth/evaluate.hpp"
#include "ddepth/kitti.hpp"
#include "ddepth/simulate.hpp"
