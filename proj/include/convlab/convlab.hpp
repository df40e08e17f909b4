// Convenience umbrella: pulls in the whole library.
#pragma once

#include "convlab/cluster.hpp"
#include "convlab/common.hpp"
#include "convlab/data.hpp"
#include "convlab/experiment.hpp"
#include "convlab/metrics.hpp"
#include "convlab/model.hpp"
#include "convlab/postprocess.hpp"
#include "convlab/protocol.hpp"
#include "convlab/schemes.hpp"
