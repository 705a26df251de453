#pragma once

#define SGKKT_VERSION "0.1.0"

#include "experiment.hpp"
#include "fem_q1.hpp"
#include "galerkin_ops.hpp"
#include "krylov.hpp"
#include "la_core.hpp"
#include "preconditioners.hpp"
#include "random_field.hpp"
#include "spectral_analysis.hpp"
#include "stochastic_basis.hpp"
