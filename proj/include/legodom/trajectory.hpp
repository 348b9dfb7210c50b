#pragma once

#include <vector>

#include "legodom/so3.hpp"

namespace legodom {

struct StampedPose {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Rotation G = Rotation::Identity();
};

/// Poses with strictly increasing timestamps.
using Trajectory = std::vector<StampedPose>;

}  // namespace legodom
