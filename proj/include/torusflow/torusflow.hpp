#pragma once

#include "torusflow/brownian.hpp"
#include "torusflow/config.hpp"
#include "torusflow/diagnostics.hpp"
#include "torusflow/diffeo.hpp"
#include "torusflow/errors.hpp"
#include "torusflow/eulerian.hpp"
#include "torusflow/fft.hpp"
#include "torusflow/field.hpp"
#include "torusflow/field_io.hpp"
#include "torusflow/grid.hpp"
#include "torusflow/initial_conditions.hpp"
#include "torusflow/interp.hpp"
#include "torusflow/lagrangian.hpp"
#include "torusflow/noise_basis.hpp"
#include "torusflow/noise_flow.hpp"
#include "torusflow/parallel.hpp"
#include "torusflow/rng.hpp"
#include "torusflow/spectral.hpp"
#include "torusflow/trajectory.hpp"
#include "torusflow/transport.hpp"
