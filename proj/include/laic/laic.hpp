#pragma once

#include "laic/core.hpp"
#include "laic/covariance.hpp"
#include "laic/dynamics.hpp"
#include "laic/model_error.hpp"
#include "laic/observing.hpp"
#include "laic/rng.hpp"

#include "laic/da/cycling.hpp"
#include "laic/da/kalman.hpp"
#include "laic/da/variational.hpp"

#include "laic/diag/autocorrelation.hpp"
#include "laic/diag/laic.hpp"
#include "laic/diag/moment_oracle.hpp"
#include "laic/diag/statistics.hpp"

#include "laic/harness/config.hpp"
#include "laic/harness/experiment.hpp"
#include "laic/harness/oracle_bridge.hpp"
#include "laic/harness/report.hpp"
#include "laic/harness/store_io.hpp"
#include "laic/harness/suite.hpp"
