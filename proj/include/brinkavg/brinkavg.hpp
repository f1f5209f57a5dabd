#pragma once

#include "brinkavg/averaging.hpp"
#include "brinkavg/basis.hpp"
#include "brinkavg/coefficient.hpp"
#include "brinkavg/common.hpp"
#include "brinkavg/config.hpp"
#include "brinkavg/fastproc.hpp"
#include "brinkavg/harness.hpp"
#include "brinkavg/io.hpp"
#include "brinkavg/quadrature.hpp"
#include "brinkavg/rng.hpp"
#include "brinkavg/slowsolver.hpp"
#include "brinkavg/validate.hpp"
