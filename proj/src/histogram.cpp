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

#include "uwbnlos/histogram.hpp"

#include "uwbnlos/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uwbnlos
{

std::optional<std::size_t> histogram_axis::locate(double v) const
{
    if (!(v >= lower) || !(v <= upper()))
        return std::nullopt;
    const auto i = static_cast<std::size_t>((v - lower) / width);
    return std::min(i, bins - 1);
}

std::size_t histogram_axis::locate_clamped(double v) const
{
    if (!(v > lower))
        return 0;
    if (!(v < upper()))
        return bins - 1;
    return std::min(static_cast<std::size_t>((v - lower) / width), bins - 1);
}

histogram_axis axis_covering(std::span<const double> values, std::size_t bins)
{
    if (values.empty() || bins == 0)
        throw domain_error("axis_covering needs values and at least one bin");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    double width = bins > 1 ? (*hi - *lo) / static_cast<double>(bins - 1) : (*hi - *lo);
    if (!(width > 0.0))
        width = std::max(std::abs(*lo), 1e-300) * 1e-6;
    return {*lo - 0.5 * width, width, bins};
}

histogram_grid::histogram_grid(std::vector<histogram_axis> axes, std::vector<double> density)
    : axes_(std::move(axes)), density_(std::move(density))
{
    std::size_t n = 1;
    for (const auto &a : axes_)
    {
        if (a.bins == 0 || !(a.width > 0.0))
            throw domain_error("histogram axes need positive widths and bin counts");
        n *= a.bins;
    }
    if (n != density_.size())
        throw domain_error("histogram density size does not match its axes");
}

double histogram_grid::cell_volume() const
{
    double v = 1.0;
    for (const auto &a : axes_)
        v *= a.width;
    return v;
}

double histogram_grid::total_mass() const
{
    return std::accumulate(density_.begin(), density_.end(), 0.0) * cell_volume();
}

std::size_t histogram_grid::stride(std::size_t axis) const
{
    std::size_t s = 1;
    for (std::size_t k = axis + 1; k < axes_.size(); ++k)
        s *= axes_[k].bins;
    return s;
}

std::optional<std::size_t> histogram_grid::cell_of(std::span<const double> point) const
{
    if (point.size() != axes_.size())
        throw domain_error("point dimension does not match histogram");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < axes_.size(); ++k)
    {
        const auto i = axes_[k].locate(point[k]);
        if (!i)
            return std::nullopt;
        flat = flat * axes_[k].bins + *i;
    }
    return flat;
}

double histogram_grid::value_at(std::span<const double> point) const
{
    const auto c = cell_of(point);
    return c ? density_[*c] : 0.0;
}

std::vector<double> histogram_grid::axis_means() const
{
    std::vector<double> mean(axes_.size(), 0.0);
    double mass = 0.0;
    std::vector<std::size_t> idx(axes_.size(), 0);
    for (std::size_t flat = 0; flat < density_.size(); ++flat)
    {
        std::size_t rem = flat;
        for (std::size_t k = axes_.size(); k-- > 0;)
        {
            idx[k] = rem % axes_[k].bins;
            rem /= axes_[k].bins;
        }
        const double m = density_[flat];
        mass += m;
        for (std::size_t k = 0; k < axes_.size(); ++k)
            mean[k] += m * axes_[k].center(idx[k]);
    }
    for (double &v : mean)
        v /= mass;
    return mean;
}

histogram_grid build_histogram(std::span<const std::vector<double>> samples, std::vector<histogram_axis> axes)
{
    if (samples.empty())
        throw domain_error("cannot build a histogram from zero samples");
    if (axes.empty())
        throw domain_error("histogram needs at least one axis");

    std::size_t cells = 1;
    for (const auto &a : axes)
    {
        if (a.bins == 0 || !(a.width > 0.0))
            throw domain_error("histogram axes need positive widths and bin counts");
        cells *= a.bins;
    }
    std::vector<double> count(cells, 0.0);
    std::size_t clamped = 0;
    for (const auto &s : samples)
    {
        if (s.size() != axes.size())
            throw domain_error("sample dimension does not match histogram axes");
        std::size_t flat = 0;
        bool outside = false;
        for (std::size_t k = 0; k < axes.size(); ++k)
        {
            outside = outside || !axes[k].locate(s[k]);
            flat = flat * axes[k].bins + axes[k].locate_clamped(s[k]);
        }
        clamped += outside ? 1 : 0;
        count[flat] += 1.0;
    }

    double volume = 1.0;
    for (const auto &a : axes)
        volume *= a.width;
    const double scale = 1.0 / (static_cast<double>(samples.size()) * volume);
    for (double &c : count)
        c *= scale;
    histogram_grid h(std::move(axes), std::move(count));
    h.clamped_samples = clamped;
    return h;
}

namespace
{

// Applies f to every 1-D line along `axis`, replacing the axis by `out_axis`.
template <typename F>
std::vector<double> along_axis(const std::vector<histogram_axis> &axes, const std::vector<double> &data,
                               std::size_t axis, std::size_t out_bins, F f)
{
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < axis; ++k)
        outer *= axes[k].bins;
    for (std::size_t k = axis + 1; k < axes.size(); ++k)
        inner *= axes[k].bins;
    const std::size_t in_bins = axes[axis].bins;

    std::vector<double> out(outer * out_bins * inner);
    std::vector<double> line(in_bins), result(out_bins);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
        {
            for (std::size_t k = 0; k < in_bins; ++k)
                line[k] = data[(o * in_bins + k) * inner + i];
            f(line, result);
            for (std::size_t k = 0; k < out_bins; ++k)
                out[(o * out_bins + k) * inner + i] = result[k];
        }
    return out;
}

} // namespace

histogram_grid interpolate_smooth(const histogram_grid &h, const smoothing_options &opt)
{
    if (opt.upsample < 2)
        throw domain_error("upsample factor must be at least 2");
    if (opt.taps == 0)
        throw domain_error("smoothing window must have at least one tap");

    auto axes = h.axes();
    auto data = h.density();
    const auto factor = static_cast<double>(opt.upsample);

    for (std::size_t a = 0; a < axes.size(); ++a)
    {
        const std::size_t nb = axes[a].bins;
        const std::size_t out_bins = nb * opt.upsample;
        data = along_axis(axes, data, a, out_bins, [&](const std::vector<double> &in, std::vector<double> &out) {
            for (std::size_t k = 0; k < out_bins; ++k)
            {
                // Fine-cell center expressed in coarse-center coordinates.
                const double s = std::clamp((static_cast<double>(k) + 0.5) / factor - 0.5, 0.0,
                                            static_cast<double>(nb - 1));
                const auto i0 = std::min(static_cast<std::size_t>(s), nb - 1);
                const std::size_t i1 = std::min(i0 + 1, nb - 1);
                const double t = s - static_cast<double>(i0);
                out[k] = (1.0 - t) * in[i0] + t * in[i1];
            }
        });
        axes[a].bins = out_bins;
        axes[a].width /= factor;
    }

    const auto half = static_cast<std::ptrdiff_t>(opt.taps / 2);
    const auto lead = static_cast<std::ptrdiff_t>(opt.taps) - 1 - half;
    for (std::size_t pass = 0; pass < opt.passes; ++pass)
        for (std::size_t a = 0; a < axes.size(); ++a)
        {
            const auto nb = static_cast<std::ptrdiff_t>(axes[a].bins);
            data = along_axis(axes, data, a, axes[a].bins, [&](const std::vector<double> &in, std::vector<double> &out) {
                for (std::ptrdiff_t k = 0; k < nb; ++k)
                {
                    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - half);
                    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(nb - 1, k + lead);
                    double acc = 0.0;
                    for (std::ptrdiff_t j = lo; j <= hi; ++j)
                        acc += in[static_cast<std::size_t>(j)];
                    out[static_cast<std::size_t>(k)] = acc / static_cast<double>(hi - lo + 1);
                }
            });
        }

    for (double &v : data)
        v = std::max(v, 0.0);
    histogram_grid out(std::move(axes), std::move(data));
    const double mass = out.total_mass();
    if (!(mass > 0.0))
        throw domain_error("smoothing produced a zero-mass histogram");
    auto scaled = out.density();
    for (double &v : scaled)
        v /= mass;
    histogram_grid result(out.axes(), std::move(scaled));
    result.clamped_samples = h.clamped_samples;
    return result;
}

histogram_grid marginalize(const histogram_grid &h, std::span<const std::size_t> drop)
{
    auto axes = h.axes();
    auto data = h.density();
    // Drop from the highest axis down so the remaining indices stay valid.
    for (std::size_t n = drop.size(); n-- > 0;)
    {
        const std::size_t a = drop[n];
        if (a >= axes.size() || (n > 0 && drop[n - 1] >= a))
            throw domain_error("marginalize needs ascending, valid axis indices");
        const double w = axes[a].width;
        data = along_axis(axes, data, a, 1, [&](const std::vector<double> &in, std::vector<double> &out) {
            out[0] = std::accumulate(in.begin(), in.end(), 0.0) * w;
        });
        axes.erase(axes.begin() + static_cast<std::ptrdiff_t>(a));
    }
    if (axes.empty())
        throw domain_error("cannot marginalize every axis");
    return histogram_grid(std::move(axes), std::move(data));
}

} // namespace uwbnlos
