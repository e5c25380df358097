#pragma once

#include "errors.hpp"
#include "event_io.hpp"
#include "fir.hpp"
#include "gp.hpp"
#include "lc_engine.hpp"
#include "levels.hpp"
#include "metrics.hpp"
#include "optimize.hpp"
#include "pipeline.hpp"
#include "sensitivity.hpp"
#include "signal.hpp"
#include "signal_io.hpp"
#include "split.hpp"
#include "synthetic.hpp"
