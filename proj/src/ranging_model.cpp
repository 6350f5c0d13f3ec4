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

#include "uwbnlos/ranging_model.hpp"

#include "uwbnlos/config_file.hpp"

#include <cmath>
#include <random>

namespace uwbnlos
{

void noise_model::validate() const
{
    if (!(gamma > 0.0) || !(sigma_n2 > 0.0) || !(beta >= 0.0))
        throw config_error("noise model needs gamma > 0, sigma_n2 > 0, beta >= 0");
}

noise_model noise_model_from(const key_value_file &kv)
{
    noise_model m;
    m.gamma = kv.get_double("gamma", m.gamma);
    m.sigma_n2 = kv.get_double("sigma_n2", m.sigma_n2);
    m.beta = kv.get_double("beta", m.beta);
    m.validate();
    return m;
}

double noise_stddev(const noise_model &model, double d)
{
    if (!(d > 0.0))
        throw domain_error("noise_stddev needs d > 0");
    return std::sqrt(model.gamma * model.sigma_n2 * std::pow(d, model.beta));
}

double simulate_toa(double d, double b, const noise_model &model, rng_stream &rng)
{
    const double sigma = noise_stddev(model, d);
    const double w = std::normal_distribution<double>(0.0, 1.0)(rng) * sigma;
    return d / speed_of_light + b + w;
}

double simulate_toa(const waveform_record &w, const noise_model &model, rng_stream &rng)
{
    return simulate_toa(w.true_distance, w.true_bias, model, rng);
}

double threshold_toa(const waveform_record &w, double fraction)
{
    if (!(fraction > 0.0 && fraction < 1.0))
        throw domain_error("threshold fraction must lie in (0, 1)");
    const double peak = max_amplitude(w);
    if (!(peak > 0.0))
        throw domain_error("threshold TOA of a zero waveform");
    return first_crossing(w, fraction * peak);
}

} // namespace uwbnlos
