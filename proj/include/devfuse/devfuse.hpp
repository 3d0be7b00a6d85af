#pragma once

#include "devfuse/baselines.hpp"
#include "devfuse/block_fusion.hpp"
#include "devfuse/decision.hpp"
#include "devfuse/deviation.hpp"
#include "devfuse/error.hpp"
#include "devfuse/image_io.hpp"
#include "devfuse/metrics.hpp"
#include "devfuse/multi_matrix.hpp"
#include "devfuse/pipeline.hpp"
#include "devfuse/pooling.hpp"
