#pragma once

#include "revise/reflector/agreement.hpp"
#include "revise/reflector/critic.hpp"
#include "revise/reflector/pretrain.hpp"
#include "revise/reflector/prompt.hpp"
