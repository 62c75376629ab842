#pragma once

#include "distributions.hpp"
#include "point_measure.hpp"
#include "primitives.hpp"
#include "ht_sequence.hpp"
#include "engine.hpp"
#include "scaling.hpp"
#include "rbm.hpp"
#include "diagnostics.hpp"
#include "experiment.hpp"
