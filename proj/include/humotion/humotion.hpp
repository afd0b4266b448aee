#pragma once

#include "humotion/augment.hpp"
#include "humotion/common.hpp"
#include "humotion/dataset.hpp"
#include "humotion/geom.hpp"
#include "humotion/metrics.hpp"
#include "humotion/pipeline.hpp"
#include "humotion/policy.hpp"
#include "humotion/retarget.hpp"
#include "humotion/robot_io.hpp"
#include "humotion/skeleton.hpp"
