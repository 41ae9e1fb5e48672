#pragma once

// Everything in one include.

#include "tailcen/analyze.hpp"
#include "tailcen/baselines.hpp"
#include "tailcen/censored_mle.hpp"
#include "tailcen/dataset.hpp"
#include "tailcen/distributions.hpp"
#include "tailcen/error.hpp"
#include "tailcen/fixed_k/cache.hpp"
#include "tailcen/fixed_k/config.hpp"
#include "tailcen/fixed_k/densities.hpp"
#include "tailcen/fixed_k/ev.hpp"
#include "tailcen/fixed_k/lagrange.hpp"
#include "tailcen/fixed_k/lr_test.hpp"
#include "tailcen/montecarlo.hpp"
#include "tailcen/tail_data.hpp"
#include "tailcen/types.hpp"
