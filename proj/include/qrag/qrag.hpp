#pragma once

// Umbrella header: value-based multi-step retrieval over chunked documents,
// from the episode environment up to the training and evaluation harness.

#include "qrag/checkpoint.hpp"
#include "qrag/common.hpp"
#include "qrag/config.hpp"
#include "qrag/core.hpp"
#include "qrag/encoder.hpp"
#include "qrag/env.hpp"
#include "qrag/featurize.hpp"
#include "qrag/harness.hpp"
#include "qrag/inference.hpp"
#include "qrag/metrics.hpp"
#include "qrag/optim.hpp"
#include "qrag/parallel.hpp"
#include "qrag/policy.hpp"
#include "qrag/relpos.hpp"
#include "qrag/returns.hpp"
#include "qrag/rng.hpp"
#include "qrag/rope.hpp"
#include "qrag/scoring.hpp"
#include "qrag/taskgen.hpp"
#include "qrag/tensor.hpp"
#include "qrag/train.hpp"
