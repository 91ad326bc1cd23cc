// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hennion/core.hpp"
#include "hennion/rng.hpp"
#include "hennion/algebra.hpp"
#include "hennion/metric.hpp"
#include "hennion/superop.hpp"
#include "hennion/contraction.hpp"
#include "hennion/process.hpp"
#include "hennion/fcs.hpp"
#include "hennion/io.hpp"
#include "hennion/parallel.hpp"
#include "hennion/experiment.hpp"
