#pragma once

#include <string>
#include <vector>

#include "skp/pipeline/config.hpp"

namespace skp::pipeline {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Finite-difference checks of every differentiable building block, one
/// outcome per block, `seeds` random draws each.
std::vector<CheckOutcome> gradient_checks(std::size_t seeds);

/// Predicted class and canonical points of synthetic objects under random
/// z-rotations and global rescaling, using an untrained model built from
/// `cfg`.
std::vector<CheckOutcome> invariance_checks(const RunConfig& cfg, std::size_t objects);

}  // namespace skp::pipeline
