#pragma once

#include "synthcombo/baselines.hpp"
#include "synthcombo/cart.hpp"
#include "synthcombo/design.hpp"
#include "synthcombo/errors.hpp"
#include "synthcombo/estimator.hpp"
#include "synthcombo/hypercube.hpp"
#include "synthcombo/io.hpp"
#include "synthcombo/parallel.hpp"
#include "synthcombo/pcr.hpp"
#include "synthcombo/perm_pipeline.hpp"
#include "synthcombo/random.hpp"
#include "synthcombo/simdata.hpp"
#include "synthcombo/sparse_regress.hpp"
#include "synthcombo/stats.hpp"
