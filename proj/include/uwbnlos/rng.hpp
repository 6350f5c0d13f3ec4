// SPDX-License-Identifier: Apache-2.0
//
// uwbnlos - NLOS bias characterization and mitigation for UWB TOA localization
// Copyright (C) 2026 The uwbnlos authors
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

#include <cstdint>
#include <random>

namespace uwbnlos
{

/// Random stream used throughout the toolkit.
using rng_stream = std::mt19937_64;

/// Deterministically derives an independent stream from a master seed and a stream index.
/// Equal (seed, index) pairs always give bit-identical sequences.
rng_stream make_stream(std::uint64_t seed, std::uint64_t index);

} // namespace uwbnlos
