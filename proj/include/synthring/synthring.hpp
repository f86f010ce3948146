#pragma once

#include "synthring/model.hpp"
#include "synthring/observables.hpp"
#include "synthring/static_scattering.hpp"
#include "synthring/tight_binding.hpp"
#include "synthring/parallel.hpp"
#include "synthring/floquet.hpp"
#include "synthring/analysis.hpp"
#include "synthring/config.hpp"
#include "synthring/io.hpp"
