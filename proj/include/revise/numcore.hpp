#pragma once

#include "revise/numcore/checkpoint.hpp"
#include "revise/numcore/gradcheck.hpp"
#include "revise/numcore/graph.hpp"
#include "revise/numcore/layers.hpp"
#include "revise/numcore/optimizer.hpp"
#include "revise/numcore/params.hpp"
#include "revise/numcore/rng.hpp"
#include "revise/numcore/tensor.hpp"
