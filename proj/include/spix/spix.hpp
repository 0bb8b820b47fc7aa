// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------

#pragma once

#include "spix/camsim.hpp"
#include "spix/coherence.hpp"
#include "spix/error.hpp"
#include "spix/featurespace.hpp"
#include "spix/image.hpp"
#include "spix/kernels.hpp"
#include "spix/metrics.hpp"
#include "spix/pca.hpp"
#include "spix/reconstructor.hpp"
#include "spix/sampler.hpp"
#include "spix/scene.hpp"
#include "spix/sweep.hpp"
#include "spix/tensor.hpp"
#include "spix/trainer.hpp"
