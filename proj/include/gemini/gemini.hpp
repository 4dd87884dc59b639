#pragma once

#include "gemini/checkpoint.hpp"
#include "gemini/config.hpp"
#include "gemini/dataset_io.hpp"
#include "gemini/error.hpp"
#include "gemini/evaluation.hpp"
#include "gemini/features.hpp"
#include "gemini/graph.hpp"
#include "gemini/metrics.hpp"
#include "gemini/model.hpp"
#include "gemini/propagation.hpp"
#include "gemini/stats.hpp"
#include "gemini/synthetic.hpp"
#include "gemini/training.hpp"
