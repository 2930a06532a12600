#pragma once

// Umbrella header: the whole library.

#include "focusmr/analyze.hpp"
#include "focusmr/delta.hpp"
#include "focusmr/errors.hpp"
#include "focusmr/focus.hpp"
#include "focusmr/intervals.hpp"
#include "focusmr/json.hpp"
#include "focusmr/lambda.hpp"
#include "focusmr/liml.hpp"
#include "focusmr/rng.hpp"
#include "focusmr/simlab.hpp"
#include "focusmr/stats.hpp"
#include "focusmr/summary_data.hpp"
#include "focusmr/version.hpp"
