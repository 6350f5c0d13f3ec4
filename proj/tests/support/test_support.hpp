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
#include "uwbnlos/density_model.hpp"
#include "uwbnlos/feature_extract.hpp"

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace uwbnlos::test
{

/// Gauss-Legendre nodes and weights on [a, b] (Newton iteration on P_n).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(std::size_t n, double a, double b)
{
    std::vector<double> x(n), w(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t i = 0; i < n; ++i)
    {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it)
        {
            double p0 = 1.0, p1 = z;
            for (std::size_t k = 2; k <= n; ++k)
            {
                const double p2 = ((2.0 * static_cast<double>(k) - 1.0) * z * p1 - (static_cast<double>(k) - 1.0) * p0) /
                                  static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
            const double step = p1 / dp;
            z -= step;
            if (std::abs(step) < 1e-15)
                break;
        }
        x[i] = mid - half * z;
        w[i] = 2.0 * half / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

inline waveform_record make_record(std::vector<double> samples, double fs, double t0 = 0.0)
{
    waveform_record w;
    w.samples = std::move(samples);
    w.sample_rate = fs;
    w.t0 = t0;
    return w;
}

/// Default corpus, generated once per process.
inline const std::vector<waveform_record> &default_records()
{
    static const std::vector<waveform_record> records = generate_corpus(corpus_config{});
    return records;
}

inline const std::vector<training_sample> &default_training()
{
    static const std::vector<training_sample> samples = [] {
        std::vector<training_sample> out;
        for (const auto &r : default_records())
            out.push_back({r.state, r.true_distance, r.true_bias, extract_all(r)});
        return out;
    }();
    return samples;
}

} // namespace uwbnlos::test
