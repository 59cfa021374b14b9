#pragma once

#include "rotlab/bounds.hpp"
#include "rotlab/cost.hpp"
#include "rotlab/coupling.hpp"
#include "rotlab/divergence.hpp"
#include "rotlab/errors.hpp"
#include "rotlab/exact.hpp"
#include "rotlab/experiments.hpp"
#include "rotlab/io.hpp"
#include "rotlab/measure.hpp"
#include "rotlab/metric.hpp"
#include "rotlab/rng.hpp"
#include "rotlab/runners.hpp"
#include "rotlab/shadow.hpp"
#include "rotlab/solve.hpp"
