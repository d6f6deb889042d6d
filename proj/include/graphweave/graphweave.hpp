#pragma once

// Umbrella header: graphs in, networks out, graphs back.

#include "graphweave/data.hpp"
#include "graphweave/errors.hpp"
#include "graphweave/extraction.hpp"
#include "graphweave/generators.hpp"
#include "graphweave/graph.hpp"
#include "graphweave/io.hpp"
#include "graphweave/models.hpp"
#include "graphweave/nn.hpp"
#include "graphweave/pruning.hpp"
#include "graphweave/rng.hpp"
#include "graphweave/tensor.hpp"
#include "graphweave/train.hpp"
