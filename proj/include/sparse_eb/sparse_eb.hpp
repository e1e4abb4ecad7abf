#pragma once

#include "core.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "posterior.hpp"
#include "rng.hpp"
#include "selector.hpp"
#include "uq.hpp"
