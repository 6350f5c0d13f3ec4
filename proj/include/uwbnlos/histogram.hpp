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

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace uwbnlos
{

struct histogram_axis
{
    double lower = 0.0;
    double width = 1.0;
    std::size_t bins = 1;

    double upper() const { return lower + width * static_cast<double>(bins); }
    double edge(std::size_t k) const { return lower + width * static_cast<double>(k); }
    double center(std::size_t i) const { return lower + width * (static_cast<double>(i) + 0.5); }
    /// Bin containing v, or nullopt outside [lower, upper]. The upper edge belongs to the last bin.
    std::optional<std::size_t> locate(double v) const;
    /// Like locate, but values outside are pushed into the nearest edge bin.
    std::size_t locate_clamped(double v) const;

    friend bool operator==(const histogram_axis &, const histogram_axis &) = default;
};

/// Axis spanning [min, max] of the values with `bins` bins whose centers sit half a bin inside.
histogram_axis axis_covering(std::span<const double> values, std::size_t bins);

/// Dense N-dimensional histogram in row-major order (last axis fastest). Values are densities
/// per unit cell volume.
class histogram_grid
{
public:
    histogram_grid() = default;
    histogram_grid(std::vector<histogram_axis> axes, std::vector<double> density);

    const std::vector<histogram_axis> &axes() const { return axes_; }
    const histogram_axis &axis(std::size_t k) const { return axes_[k]; }
    std::size_t dims() const { return axes_.size(); }
    std::size_t cell_count() const { return density_.size(); }
    bool empty() const { return axes_.empty(); }

    const std::vector<double> &density() const { return density_; }
    double operator[](std::size_t flat) const { return density_[flat]; }

    double cell_volume() const;
    double total_mass() const;
    std::size_t stride(std::size_t axis) const;

    /// Flat index of the cell containing the point, nullopt if outside the grid.
    std::optional<std::size_t> cell_of(std::span<const double> point) const;
    /// Density of the containing cell, 0 outside.
    double value_at(std::span<const double> point) const;

    /// Mass-weighted mean of each axis using cell centers.
    std::vector<double> axis_means() const;

    /// Samples that fell outside the axes and were clamped into edge bins during construction.
    std::size_t clamped_samples = 0;

    friend bool operator==(const histogram_grid &a, const histogram_grid &b)
    {
        return a.axes_ == b.axes_ && a.density_ == b.density_;
    }

private:
    std::vector<histogram_axis> axes_;
    std::vector<double> density_;
};

/// count / (N * cell_volume) for every cell. Each sample must have one coordinate per axis.
histogram_grid build_histogram(std::span<const std::vector<double>> samples, std::vector<histogram_axis> axes);

struct smoothing_options
{
    std::size_t upsample = 4;
    std::size_t taps = 3;   // moving-average window length per axis
    std::size_t passes = 2; // filter repetitions
};

/// Multilinear interpolation onto a grid refined by `upsample` per axis, then a separable moving
/// average, clipped to non-negative and renormalized to unit mass.
histogram_grid interpolate_smooth(const histogram_grid &h, const smoothing_options &opt = {});

/// Integrates out the axes listed in `drop` (ascending), keeping the rest in order.
histogram_grid marginalize(const histogram_grid &h, std::span<const std::size_t> drop);

} // namespace uwbnlos
