// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

// Umbrella header.
#pragma once

#include "vivid/autograd.hpp"
#include "vivid/checkpoint.hpp"
#include "vivid/config.hpp"
#include "vivid/dataset.hpp"
#include "vivid/denoiser.hpp"
#include "vivid/diffusion.hpp"
#include "vivid/eit.hpp"
#include "vivid/error.hpp"
#include "vivid/intensity_predictor.hpp"
#include "vivid/metrics.hpp"
#include "vivid/model.hpp"
#include "vivid/motion_data.hpp"
#include "vivid/nn.hpp"
#include "vivid/optim.hpp"
#include "vivid/plot.hpp"
#include "vivid/rim.hpp"
#include "vivid/rng.hpp"
#include "vivid/synthetic.hpp"
#include "vivid/text_embed.hpp"
#include "vivid/train.hpp"
