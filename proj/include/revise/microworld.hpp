#pragma once

#include "revise/microworld/dataset.hpp"
#include "revise/microworld/edit.hpp"
#include "revise/microworld/instruction.hpp"
#include "revise/microworld/oracle.hpp"
#include "revise/microworld/scene.hpp"
#include "revise/microworld/video.hpp"
