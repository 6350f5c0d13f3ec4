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
#include "uwbnlos/common.hpp"
#include "uwbnlos/feature_extract.hpp"
#include "uwbnlos/rng.hpp"

#include <optional>

namespace uwbnlos
{

class key_value_file;

/// Ranging noise variance gamma * sigma_n2 * d^beta.
struct noise_model
{
    double gamma = 1.0;
    double sigma_n2 = 9e-20; // s^2 m^-beta, gives 0.3 ns at 1 m
    double beta = 2.0;

    void validate() const;
};

/// Reads gamma, sigma_n2 and beta; other keys are left for the caller to check.
noise_model noise_model_from(const key_value_file &kv);

double noise_stddev(const noise_model &model, double d);

/// d / c0 + b + w with w ~ N(0, noise_stddev(d)^2).
double simulate_toa(double d, double b, const noise_model &model, rng_stream &rng);
double simulate_toa(const waveform_record &w, const noise_model &model, rng_stream &rng);

/// Leading-edge estimate: first time |r| exceeds fraction * max|r|.
double threshold_toa(const waveform_record &w, double fraction = 0.1);

struct link_truth
{
    double d = 0.0;
    double b = 0.0;
    channel_state state = channel_state::los;
};

struct ranging_observation
{
    double tau = 0.0;
    feature_vector features;
    vec2 anchor;
    std::optional<link_truth> truth;
};

} // namespace uwbnlos
