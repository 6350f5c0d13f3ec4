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

#include "uwbnlos/channel_corpus.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace uwbnlos
{

/// The six waveform features. tau_ds is a second central moment and is kept in s^2.
struct feature_vector
{
    double r_max = 0.0;    // x0
    double tau_m = 0.0;    // x1, s
    double tau_ds = 0.0;   // x2, s^2
    double energy = 0.0;   // x3
    double t_rise = 0.0;   // x4, s
    double kurtosis = 0.0; // x5, NaN when the record has constant magnitude

    static constexpr std::size_t size = 6;
    std::array<double, size> as_array() const { return {r_max, tau_m, tau_ds, energy, t_rise, kurtosis}; }
    static feature_vector from_array(const std::array<double, size> &a)
    {
        return {a[0], a[1], a[2], a[3], a[4], a[5]};
    }
    friend bool operator==(const feature_vector &, const feature_vector &) = default;
};

inline constexpr std::array<std::string_view, feature_vector::size> feature_names = {
    "r_max", "tau_m", "tau_ds", "energy", "t_rise", "kurtosis"};

/// Distance-free reparameterization of the reduced feature set.
struct distance_free_features
{
    double r_max0 = 0.0;
    double tau_m_slope = 0.0;  // s/m
    double tau_ds_slope = 0.0; // s^2/m
};

struct feature_model_params
{
    double r_max_slope = 0.0;   // r_max decreases by this much per metre
    double tau_ds_offset = 0.0; // s^2
};

struct line_fit
{
    double intercept = 0.0;
    double slope = 0.0;
    double intercept_stderr = 0.0;
    double slope_stderr = 0.0;
    double residual_rms = 0.0;
    std::size_t n = 0;
};

struct feature_model_fit
{
    feature_model_params params;
    line_fit r_max;
    line_fit tau_ds;
};

double max_amplitude(const waveform_record &w);
double energy(const waveform_record &w);
double mean_excess_delay(const waveform_record &w);
double delay_spread(const waveform_record &w);
double rise_time(const waveform_record &w);
/// Kurtosis of |r| over samples [first, first + count); count = 0 means up to the end.
/// Throws domain_error when |r| is constant over the window.
double kurtosis(const waveform_record &w, std::size_t first = 0, std::size_t count = 0);

feature_vector extract_all(const waveform_record &w);

/// Earliest time where |r| exceeds level (absolute), linearly interpolated. Throws if never exceeded.
double first_crossing(const waveform_record &w, double level);

double correlation_coefficient(std::span<const double> a, std::span<const double> b);

/// Ordinary least squares y = intercept + slope * x with classical standard errors.
line_fit fit_line(std::span<const double> x, std::span<const double> y);

feature_model_fit fit_feature_models(std::span<const feature_vector> features, std::span<const double> distances);

distance_free_features to_distance_free(const feature_vector &x, double d, const feature_model_params &params);

} // namespace uwbnlos
