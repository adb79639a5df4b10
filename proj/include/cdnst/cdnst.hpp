#ifndef CDNST_CDNST_HPP
#define CDNST_CDNST_HPP

#include "cdnst/domain.hpp"
#include "cdnst/random.hpp"
#include "cdnst/dcn.hpp"
#include "cdnst/model.hpp"
#include "cdnst/gibbs.hpp"
#include "cdnst/metrics.hpp"
#include "cdnst/baselines.hpp"
#include "cdnst/relatedness.hpp"
#include "cdnst/parallel.hpp"
#include "cdnst/harness.hpp"
#include "cdnst/io.hpp"

#endif
