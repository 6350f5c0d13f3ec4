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

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace uwbnlos
{

/// Speed of light in vacuum, m/s (exact by definition of the metre).
inline constexpr double speed_of_light = 299792458.0;

/// Invalid argument or precondition violation on a numerical routine.
class domain_error : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent configuration.
class config_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct vec2
{
    double x = 0.0;
    double y = 0.0;

    friend constexpr vec2 operator+(vec2 a, vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr vec2 operator-(vec2 a, vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr vec2 operator*(double s, vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(vec2 a, vec2 b) = default;
};

inline double norm(vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(vec2 a, vec2 b) { return norm(a - b); }

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Standard normal pdf.
inline double normal_pdf(double z)
{
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

/// log of the upper tail Q(z) = 1 - Phi(z), accurate for large positive z.
double log_normal_tail(double z);

} // namespace uwbnlos
