#pragma once

// Core library: everything except the command-line front end.

#include "rdhomog/error.hpp"
#include "rdhomog/geometry.hpp"
#include "rdhomog/distortion.hpp"
#include "rdhomog/poly.hpp"
#include "rdhomog/solvers.hpp"
#include "rdhomog/scene.hpp"
#include "rdhomog/robust.hpp"
#include "rdhomog/bench.hpp"
