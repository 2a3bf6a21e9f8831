#pragma once

/// \file race/all.hpp
/// \brief Convenience header pulling in the whole library.

#include "race/sparsemat.hpp"
#include "race/levels.hpp"
#include "race/race.hpp"
#include "race/executor.hpp"
#include "race/kernels.hpp"
#include "race/baselines.hpp"
#include "race/perfmodel.hpp"
#include "race/bench.hpp"
