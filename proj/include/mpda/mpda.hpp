#pragma once

#include "mpda/bench.hpp"
#include "mpda/graph.hpp"
#include "mpda/grid.hpp"
#include "mpda/io.hpp"
#include "mpda/mp.hpp"
#include "mpda/multigrid.hpp"
#include "mpda/oracle.hpp"
#include "mpda/parallel.hpp"
#include "mpda/rng.hpp"
#include "mpda/sparse.hpp"
#include "mpda/spde.hpp"
#include "mpda/var3d.hpp"

//! Message-passing spatial data assimilation on GMRF priors.
namespace mpda {}
