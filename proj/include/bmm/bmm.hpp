#pragma once

// Convenience include for the whole library.

#include "baselines.hpp"
#include "core.hpp"
#include "engine.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "math.hpp"
#include "model_selection.hpp"
#include "predict.hpp"
#include "simulate.hpp"
