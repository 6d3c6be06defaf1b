#pragma once

#include "cohmoment/rng.hpp"
#include "cohmoment/parallel.hpp"
#include "cohmoment/qstate.hpp"
#include "cohmoment/pattern.hpp"
#include "cohmoment/polynomial.hpp"
#include "cohmoment/moments.hpp"
#include "cohmoment/thresholds.hpp"
#include "cohmoment/schur.hpp"
#include "cohmoment/experiments.hpp"
#include "cohmoment/io.hpp"
#include "cohmoment/verify.hpp"
