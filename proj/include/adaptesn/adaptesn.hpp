#pragma once

#include "adaptesn/error.hpp"
#include "adaptesn/esn.hpp"
#include "adaptesn/harness.hpp"
#include "adaptesn/lorenz.hpp"
#include "adaptesn/metrics.hpp"
#include "adaptesn/model_io.hpp"
#include "adaptesn/pairs.hpp"
#include "adaptesn/parallel.hpp"
#include "adaptesn/rng.hpp"
#include "adaptesn/strategies.hpp"
#include "adaptesn/trajectory_io.hpp"
