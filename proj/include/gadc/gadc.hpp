// Copyright (c) 2026 gadc contributors
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header.

#pragma once

#include "gadc/ablate.hpp"
#include "gadc/aggregation.hpp"
#include "gadc/checkpoint.hpp"
#include "gadc/common.hpp"
#include "gadc/config.hpp"
#include "gadc/dataset.hpp"
#include "gadc/fusion.hpp"
#include "gadc/geometry.hpp"
#include "gadc/gradcheck.hpp"
#include "gadc/gradsuite.hpp"
#include "gadc/image_net.hpp"
#include "gadc/io.hpp"
#include "gadc/loss.hpp"
#include "gadc/maps.hpp"
#include "gadc/metrics.hpp"
#include "gadc/model.hpp"
#include "gadc/nn.hpp"
#include "gadc/optim.hpp"
#include "gadc/point_completion.hpp"
#include "gadc/spatial.hpp"
#include "gadc/tensor.hpp"
#include "gadc/train.hpp"
