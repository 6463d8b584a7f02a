#pragma once

#include "uwofdm/channel.hpp"
#include "uwofdm/config_file.hpp"
#include "uwofdm/cpref.hpp"
#include "uwofdm/errors.hpp"
#include "uwofdm/fec.hpp"
#include "uwofdm/frame.hpp"
#include "uwofdm/harness.hpp"
#include "uwofdm/numerics.hpp"
#include "uwofdm/rng.hpp"
#include "uwofdm/rxchain.hpp"
#include "uwofdm/txchain.hpp"
