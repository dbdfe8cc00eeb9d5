#pragma once

#include "revise/objectives/losses.hpp"
#include "revise/objectives/train.hpp"
