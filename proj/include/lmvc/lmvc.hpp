// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

// Umbrella header.

#include "lmvc/eval/report.hpp"
#include "lmvc/pipeline/pipeline.hpp"
#include "lmvc/schedule.hpp"
#include "lmvc/synthesis.hpp"
#include "lmvc/train/trainer.hpp"
