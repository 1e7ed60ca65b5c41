#pragma once

#include <cstdint>
#include <string>

#include "branchnet/network.hpp"

namespace branchnet {

/// Directory format "branchnet-model/1": model.json holds dims, the three
/// normalization states, the mode, and the master seed the run derived its
/// randomness from; w1.csv / w2.csv / mask_m1.csv hold the matrices at full
/// precision.
void save_model(const BranchNetModel<double>& model, std::uint64_t seed, const std::string& dir);

struct SavedModel {
  BranchNetModel<double> model;
  std::uint64_t seed = 0;
};

SavedModel load_model(const std::string& dir);

}  // namespace branchnet
