#pragma once

#include "psc/errors.hpp"
#include "psc/grid.hpp"
#include "psc/grn.hpp"
#include "psc/parallel.hpp"
#include "psc/pide.hpp"
#include "psc/controller.hpp"
#include "psc/accelerator.hpp"
#include "psc/contractivity.hpp"
#include "psc/config.hpp"
#include "psc/app.hpp"
