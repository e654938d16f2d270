#pragma once

// Umbrella header.

#include "entbridge/core.hpp"
#include "entbridge/space.hpp"
#include "entbridge/semigroup.hpp"
#include "entbridge/functionals.hpp"
#include "entbridge/marginals.hpp"
#include "entbridge/schrodinger.hpp"
#include "entbridge/diagnostics.hpp"
#include "entbridge/inequalities.hpp"
