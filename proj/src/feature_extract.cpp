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

#include "uwbnlos/feature_extract.hpp"

#include "uwbnlos/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace uwbnlos
{

namespace
{

void require_samples(const waveform_record &w)
{
    if (w.samples.empty())
        throw domain_error("empty waveform");
    if (!(w.sample_rate > 0.0))
        throw domain_error("waveform sample rate must be positive");
}

// Trapezoidal weight of sample n in a record of length len, in units of the sample period.
double trap_weight(std::size_t n, std::size_t len) { return (n == 0 || n + 1 == len) ? 0.5 : 1.0; }

struct power_moments
{
    double e0 = 0.0; // int |r|^2
    double e1 = 0.0; // int t |r|^2
};

power_moments moments(const waveform_record &w)
{
    const std::size_t len = w.samples.size();
    const double h = w.sample_period();
    power_moments m;
    for (std::size_t n = 0; n < len; ++n)
    {
        const double p = trap_weight(n, len) * w.samples[n] * w.samples[n];
        m.e0 += p;
        m.e1 += p * w.time_of(n);
    }
    m.e0 *= h;
    m.e1 *= h;
    return m;
}

} // namespace

double max_amplitude(const waveform_record &w)
{
    require_samples(w);
    double m = 0.0;
    for (double s : w.samples)
        m = std::max(m, std::abs(s));
    return m;
}

double energy(const waveform_record &w)
{
    require_samples(w);
    return moments(w).e0;
}

double mean_excess_delay(const waveform_record &w)
{
    require_samples(w);
    const auto m = moments(w);
    if (!(m.e0 > 0.0))
        throw domain_error("mean excess delay of a zero-energy waveform");
    return m.e1 / m.e0;
}

double delay_spread(const waveform_record &w)
{
    require_samples(w);
    const auto m = moments(w);
    if (!(m.e0 > 0.0))
        throw domain_error("delay spread of a zero-energy waveform");
    const double tm = m.e1 / m.e0;
    // Central form avoids cancellation between E[t^2] and tm^2 at ~100 ns offsets.
    const std::size_t len = w.samples.size();
    double acc = 0.0;
    for (std::size_t n = 0; n < len; ++n)
    {
        const double dt = w.time_of(n) - tm;
        acc += trap_weight(n, len) * w.samples[n] * w.samples[n] * dt * dt;
    }
    return acc * w.sample_period() / m.e0;
}

double first_crossing(const waveform_record &w, double level)
{
    require_samples(w);
    const auto &s = w.samples;
    for (std::size_t n = 0; n < s.size(); ++n)
    {
        const double a = std::abs(s[n]);
        if (a > level)
        {
            if (n == 0)
                return w.time_of(0);
            const double prev = std::abs(s[n - 1]);
            const double frac = (level - prev) / (a - prev);
            return w.time_of(n - 1) + std::clamp(frac, 0.0, 1.0) * w.sample_period();
        }
    }
    throw domain_error("waveform never exceeds the requested level");
}

double rise_time(const waveform_record &w)
{
    const double peak = max_amplitude(w);
    if (!(peak > 0.0))
        throw domain_error("rise time of a zero waveform");
    // At exactly 0.9 * peak a strict ">" can miss the peak sample only if it equals the level, which
    // cannot happen since 0.9 * peak < peak.
    return first_crossing(w, 0.9 * peak) - first_crossing(w, 0.1 * peak);
}

double kurtosis(const waveform_record &w, std::size_t first, std::size_t count)
{
    require_samples(w);
    const std::size_t len = w.samples.size();
    if (first >= len)
        throw domain_error("kurtosis window starts past the end of the record");
    if (count == 0 || first + count > len)
        count = len - first;
    if (count < 2)
        throw domain_error("kurtosis window needs at least two samples");

    const auto sample = [&](std::size_t k) { return std::abs(w.samples[first + k]); };
    double span = 0.0, mean = 0.0;
    for (std::size_t k = 0; k < count; ++k)
    {
        span += trap_weight(k, count);
        mean += trap_weight(k, count) * sample(k);
    }
    mean /= span;
    double m2 = 0.0, m4 = 0.0;
    for (std::size_t k = 0; k < count; ++k)
    {
        const double d = sample(k) - mean;
        const double d2 = d * d;
        m2 += trap_weight(k, count) * d2;
        m4 += trap_weight(k, count) * d2 * d2;
    }
    m2 /= span;
    m4 /= span;
    if (!(m2 > 0.0) || m2 <= 1e-28 * mean * mean)
        throw domain_error("kurtosis undefined for a constant-magnitude signal");
    return m4 / (m2 * m2);
}

feature_vector extract_all(const waveform_record &w)
{
    feature_vector f;
    f.r_max = max_amplitude(w);
    f.energy = energy(w);
    f.tau_m = mean_excess_delay(w);
    f.tau_ds = delay_spread(w);
    f.t_rise = rise_time(w);
    try
    {
        f.kurtosis = kurtosis(w);
    }
    catch (const domain_error &)
    {
        f.kurtosis = std::numeric_limits<double>::quiet_NaN();
    }
    return f;
}

double correlation_coefficient(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw domain_error("correlation of sequences with different lengths");
    if (a.size() < 2)
        throw domain_error("correlation needs at least two samples");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0))
        throw domain_error("correlation undefined for a zero-variance sequence");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

line_fit fit_line(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw domain_error("line fit with mismatched lengths");
    if (x.size() < 2)
        throw domain_error("line fit needs at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        throw domain_error("line fit needs at least two distinct abscissae");

    line_fit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        const double r = y[i] - f.intercept - f.slope * x[i];
        rss += r * r;
    }
    f.residual_rms = std::sqrt(rss / n);
    if (x.size() > 2)
    {
        const double s2 = rss / (n - 2.0);
        f.slope_stderr = std::sqrt(s2 / sxx);
        f.intercept_stderr = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    }
    return f;
}

feature_model_fit fit_feature_models(std::span<const feature_vector> features, std::span<const double> distances)
{
    if (features.size() != distances.size())
        throw domain_error("feature and distance lists differ in length");
    std::vector<double> r(features.size()), ds(features.size());
    for (std::size_t i = 0; i < features.size(); ++i)
    {
        r[i] = features[i].r_max;
        ds[i] = features[i].tau_ds;
    }
    feature_model_fit out;
    out.r_max = fit_line(distances, r);
    out.tau_ds = fit_line(distances, ds);
    // The model is r_max = r_max0 - r_max_slope * d with a non-negative slope.
    out.params.r_max_slope = std::max(0.0, -out.r_max.slope);
    out.params.tau_ds_offset = out.tau_ds.intercept;
    return out;
}

distance_free_features to_distance_free(const feature_vector &x, double d, const feature_model_params &params)
{
    if (!(d > 0.0))
        throw domain_error("distance-free features need d > 0");
    return {x.r_max + params.r_max_slope * d, x.tau_m / d, (x.tau_ds - params.tau_ds_offset) / d};
}

} // namespace uwbnlos
