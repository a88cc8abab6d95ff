// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "spop/bench/flops.hpp"
#include "spop/bench/problem.hpp"
#include "spop/bench/training.hpp"
#include "spop/error.hpp"
#include "spop/esd.hpp"
#include "spop/linalg.hpp"
#include "spop/mat_io.hpp"
#include "spop/matrix.hpp"
#include "spop/optim.hpp"
#include "spop/optim_io.hpp"
#include "spop/specfun.hpp"
