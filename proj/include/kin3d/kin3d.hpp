#pragma once

#include "kin3d/anchors.hpp"
#include "kin3d/detection.hpp"
#include "kin3d/ego_motion.hpp"
#include "kin3d/error.hpp"
#include "kin3d/eval.hpp"
#include "kin3d/geometry.hpp"
#include "kin3d/io.hpp"
#include "kin3d/losses.hpp"
#include "kin3d/orientation.hpp"
#include "kin3d/sim.hpp"
#include "kin3d/tracker.hpp"
