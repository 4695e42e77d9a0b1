#pragma once

// Umbrella header for the flowvo library: rigid-flow scene synthesis,
// pixel-wise pose estimation with log-uncertainty, uncertainty-driven
// selection, pose refinement, evaluation metrics, and on-disk formats.

#include "flowvo/estimator.hpp"
#include "flowvo/flow_io.hpp"
#include "flowvo/geometry.hpp"
#include "flowvo/image.hpp"
#include "flowvo/losses.hpp"
#include "flowvo/manifest.hpp"
#include "flowvo/metrics.hpp"
#include "flowvo/png_io.hpp"
#include "flowvo/refinement.hpp"
#include "flowvo/rng.hpp"
#include "flowvo/selection.hpp"
#include "flowvo/synthesis.hpp"
#include "flowvo/visualize.hpp"
