#pragma once

#include "ringgyro/constants.hpp"
#include "ringgyro/errors.hpp"
#include "ringgyro/fock.hpp"
#include "ringgyro/gates.hpp"
#include "ringgyro/hamiltonian.hpp"
#include "ringgyro/metrology.hpp"
#include "ringgyro/mode_transform.hpp"
#include "ringgyro/propagator.hpp"
#include "ringgyro/robustness.hpp"
#include "ringgyro/schemes.hpp"
