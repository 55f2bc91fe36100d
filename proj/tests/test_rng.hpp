// Shared aliases for test randomness; everything is seeded and deterministic.
#pragma once

#include "sphereflow/rng.hpp"

using TestRng = sphereflow::Rng;
using sphereflow::random_field;
using sphereflow::random_rotation;
using sphereflow::random_unit_vector;
