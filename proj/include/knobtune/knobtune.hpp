#pragma once

#include "knobtune/agent.hpp"
#include "knobtune/baseline.hpp"
#include "knobtune/config_files.hpp"
#include "knobtune/env.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/external_env.hpp"
#include "knobtune/harness.hpp"
#include "knobtune/nnet.hpp"
#include "knobtune/objective.hpp"
#include "knobtune/param_space.hpp"
#include "knobtune/replay.hpp"
#include "knobtune/report.hpp"
#include "knobtune/rng.hpp"
#include "knobtune/trace.hpp"
#include "knobtune/version.hpp"
