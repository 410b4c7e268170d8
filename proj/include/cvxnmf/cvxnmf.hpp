#pragma once

#include "errors.hpp"
#include "matrix.hpp"
#include "objectives.hpp"
#include "pgd.hpp"
#include "cp_factorize.hpp"
#include "decompositions.hpp"
#include "rng.hpp"
#include "graph_partition.hpp"
#include "baselines.hpp"
#include "io.hpp"
