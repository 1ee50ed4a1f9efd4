#pragma once

#include "qbt/bench.hpp"
#include "qbt/bound.hpp"
#include "qbt/gramians.hpp"
#include "qbt/io.hpp"
#include "qbt/model.hpp"
#include "qbt/reduce.hpp"
#include "qbt/signal.hpp"
#include "qbt/simulate.hpp"
#include "qbt/spectral.hpp"
