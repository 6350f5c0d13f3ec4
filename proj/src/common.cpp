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

#include "uwbnlos/common.hpp"

namespace uwbnlos
{

double log_normal_tail(double z)
{
    if (z < 30.0)
        return std::log(0.5 * std::erfc(z / std::sqrt(2.0)));

    // Asymptotic Mills-ratio expansion; truncation error below 1e-12 at z >= 30.
    const double iz2 = 1.0 / (z * z);
    const double series = 1.0 - iz2 * (1.0 - 3.0 * iz2 * (1.0 - 5.0 * iz2 * (1.0 - 7.0 * iz2)));
    return -0.5 * z * z - std::log(z) - 0.91893853320467274178 + std::log(series);
}

} // namespace uwbnlos
