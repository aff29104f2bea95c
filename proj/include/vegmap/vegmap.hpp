#pragma once

// Umbrella header.

#include "vegmap/cluster.hpp"
#include "vegmap/embed.hpp"
#include "vegmap/error.hpp"
#include "vegmap/feature_matrix.hpp"
#include "vegmap/hsv.hpp"
#include "vegmap/hue.hpp"
#include "vegmap/image.hpp"
#include "vegmap/image_io.hpp"
#include "vegmap/learners/metrics.hpp"
#include "vegmap/learners/model.hpp"
#include "vegmap/learners/validation.hpp"
#include "vegmap/mapper.hpp"
#include "vegmap/pipeline/commands.hpp"
#include "vegmap/pipeline/config.hpp"
#include "vegmap/pipeline/project.hpp"
#include "vegmap/pipeline/service.hpp"
#include "vegmap/ranking.hpp"
#include "vegmap/rng.hpp"
#include "vegmap/synthfield.hpp"
#include "vegmap/tiling.hpp"
