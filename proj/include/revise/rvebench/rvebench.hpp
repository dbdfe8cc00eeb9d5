#pragma once

#include "revise/rvebench/evaluate.hpp"
#include "revise/rvebench/judge.hpp"
#include "revise/rvebench/scores.hpp"
