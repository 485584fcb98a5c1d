#pragma once

// Umbrella header for the ROSE singular-point detector library.

#include "rose/adam.hpp"
#include "rose/dataset.hpp"
#include "rose/errors.hpp"
#include "rose/eval.hpp"
#include "rose/heatmap.hpp"
#include "rose/image_io.hpp"
#include "rose/net.hpp"
#include "rose/nms.hpp"
#include "rose/points.hpp"
#include "rose/rng.hpp"
#include "rose/synth.hpp"
#include "rose/tensor.hpp"
#include "rose/train.hpp"
#include "rose/weights_io.hpp"
