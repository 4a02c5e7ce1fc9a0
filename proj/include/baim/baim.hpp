#ifndef BAIM_BAIM_HPP
#define BAIM_BAIM_HPP

#include "baim/container.hpp"
#include "baim/dataset.hpp"
#include "baim/forward.hpp"
#include "baim/frechet.hpp"
#include "baim/gating.hpp"
#include "baim/gradcheck.hpp"
#include "baim/graph.hpp"
#include "baim/learner.hpp"
#include "baim/linalg.hpp"
#include "baim/parameter.hpp"
#include "baim/rng.hpp"
#include "baim/tape.hpp"
#include "baim/taskmodel.hpp"
#include "baim/tensor.hpp"
#include "baim/training.hpp"
#include "baim/types.hpp"
#include "baim/verification.hpp"
#include "baim/workflow.hpp"

#endif  // BAIM_BAIM_HPP
