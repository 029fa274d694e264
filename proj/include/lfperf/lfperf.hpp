// Umbrella header. The hardware harness is separate (lfperf/harness.hpp)
// because it needs thread support at link time.

#ifndef LFPERF_LFPERF_HPP
#define LFPERF_LFPERF_HPP

#include "advisor.hpp"
#include "avg_model.hpp"
#include "markov_model.hpp"
#include "model_core.hpp"
#include "multistage_model.hpp"
#include "params_io.hpp"
#include "report.hpp"
#include "simulator.hpp"

#endif  // LFPERF_LFPERF_HPP
