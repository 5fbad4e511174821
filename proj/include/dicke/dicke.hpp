#pragma once

#include "dicke/types.hpp"
#include "dicke/model.hpp"
#include "dicke/ode.hpp"
#include "dicke/classical.hpp"
#include "dicke/linalg.hpp"
#include "dicke/ecb.hpp"
#include "dicke/spectrum.hpp"
#include "dicke/coherent.hpp"
#include "dicke/scaling.hpp"
#include "dicke/lmg.hpp"
