#pragma once

#include "revise/flowgen/model.hpp"
#include "revise/flowgen/path.hpp"
#include "revise/flowgen/sampler.hpp"
