#pragma once
// everything: bands -> momentum -> actions -> spectrum -> monodromy -> simulate, plus io

#include "simulate.hpp"
#include "io.hpp"
