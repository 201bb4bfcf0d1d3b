#pragma once

// Umbrella header: robust-and-conjugate Gaussian process regression.

#include "rcgp/bayesopt.hpp"
#include "rcgp/benchmark.hpp"
#include "rcgp/config.hpp"
#include "rcgp/data.hpp"
#include "rcgp/gaussian.hpp"
#include "rcgp/kernels.hpp"
#include "rcgp/loo.hpp"
#include "rcgp/model.hpp"
#include "rcgp/optim.hpp"
#include "rcgp/rng.hpp"
#include "rcgp/robustness.hpp"
#include "rcgp/selection.hpp"
#include "rcgp/sparse.hpp"
#include "rcgp/weighting.hpp"
