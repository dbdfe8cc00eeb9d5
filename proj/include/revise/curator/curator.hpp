#pragma once

#include "revise/curator/clips.hpp"
#include "revise/curator/cluster.hpp"
#include "revise/curator/pipeline.hpp"
#include "revise/curator/rewrite.hpp"
