#pragma once

// Umbrella header.
#include "sdidkit/attention.hpp"
#include "sdidkit/config.hpp"
#include "sdidkit/date.hpp"
#include "sdidkit/did.hpp"
#include "sdidkit/error.hpp"
#include "sdidkit/io.hpp"
#include "sdidkit/linalg.hpp"
#include "sdidkit/panel.hpp"
#include "sdidkit/pipeline.hpp"
#include "sdidkit/sdid.hpp"
#include "sdidkit/simplex.hpp"
#include "sdidkit/stats.hpp"
#include "sdidkit/synthgen.hpp"
