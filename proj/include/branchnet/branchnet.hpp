#pragma once

// Umbrella header: the whole pipeline in one include.

#include "branchnet/bench.hpp"
#include "branchnet/branchmap.hpp"
#include "branchnet/dataset.hpp"
#include "branchnet/errors.hpp"
#include "branchnet/interpret.hpp"
#include "branchnet/loss.hpp"
#include "branchnet/matrix_io.hpp"
#include "branchnet/metrics.hpp"
#include "branchnet/model_io.hpp"
#include "branchnet/network.hpp"
#include "branchnet/optimizer.hpp"
#include "branchnet/rng.hpp"
#include "branchnet/training.hpp"
#include "branchnet/trees.hpp"
#include "branchnet/wilcoxon.hpp"
