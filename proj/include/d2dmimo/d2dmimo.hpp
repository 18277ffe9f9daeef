// SPDX-License-Identifier: Apache-2.0
//
// d2dmimo: device-to-device distributed MIMO system-level simulator
// Copyright (C) 2026 The d2dmimo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "d2dmimo/allocation.hpp"
#include "d2dmimo/beamforming.hpp"
#include "d2dmimo/channel.hpp"
#include "d2dmimo/config.hpp"
#include "d2dmimo/rate.hpp"
#include "d2dmimo/sim.hpp"
#include "d2dmimo/topology.hpp"
#include "d2dmimo/types.hpp"
