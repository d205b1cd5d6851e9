// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fnndg/datagen.hpp"
#include "fnndg/errors.hpp"
#include "fnndg/evaluation.hpp"
#include "fnndg/experiment.hpp"
#include "fnndg/losses.hpp"
#include "fnndg/network.hpp"
#include "fnndg/ops.hpp"
#include "fnndg/rng.hpp"
#include "fnndg/tensor.hpp"
#include "fnndg/trainer.hpp"
