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
#include "uwbnlos/feature_extract.hpp"
#include "uwbnlos/fitted_density.hpp"
#include "uwbnlos/histogram.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uwbnlos
{

enum class estimator_kind
{
    raw,
    interpolated,
    fitted
};

enum class parameterization
{
    distance_dependent,
    distance_free
};

std::string_view to_string(estimator_kind k);
std::string_view to_string(parameterization p);
estimator_kind parse_estimator_kind(std::string_view s);
parameterization parse_parameterization(std::string_view s);

/// Default floor returned for out-of-support queries.
inline constexpr double default_floor_density = 1e-12;

/// (f convolved with N(0, sigma^2) along b)(u) for a piecewise-constant bias profile: each bin adds
/// density * [Phi((u - lo) / sigma) - Phi((u - hi) / sigma)]. `profile[j * stride]` is bin j.
double convolve_bias_axis(const histogram_axis &bias_axis, std::span<const double> profile, std::size_t stride,
                          double u, double sigma);

/// Labelled training record: the true bias and the features of one waveform at its distance.
struct training_sample
{
    channel_state state = channel_state::los;
    double d = 0.0;
    double b = 0.0;
    feature_vector x;
};

struct density_options
{
    estimator_kind kind = estimator_kind::raw;
    std::size_t dims = 2; // 1 (bias only), 2 (bias + tau_ds) or 4 (bias + r_max, tau_m, tau_ds)
    parameterization param = parameterization::distance_dependent;
    double p_los = 0.5;
    double wall_thickness = 0.32;
    std::size_t bias_bins = 0;    // 0 selects 25 for dims <= 2 and 12 for dims 4
    std::size_t feature_bins = 0; // same default rule
    smoothing_options smoothing;
    double floor_density = default_floor_density;
};

/// Mixture likelihood over (bias residual, features) for LOS and NLOS links.
///
/// Feature coordinates are the model-space vector from `model_features`: for dims 2 only the delay
/// spread (or its distance-free slope), for dims 4 the reduced triple, for dims 1 nothing.
class density_model
{
public:
    estimator_kind kind = estimator_kind::raw;
    parameterization param = parameterization::distance_dependent;
    std::size_t dims = 2;
    double p_los = 0.5;
    double bias_floor = 0.0; // t_wall / c0
    double floor_density = default_floor_density;
    feature_model_params feature_params;

    // Histogram estimators: LOS feature histogram (dims - 1 axes, point mass in b) and NLOS joint
    // histogram with the bias on axis 0. For dims 1 the LOS histogram is empty.
    histogram_grid los_hist;
    histogram_grid nlos_hist;
    // Fitted estimator.
    std::optional<fitted_density> los_fit;
    std::optional<fitted_density> nlos_fit;

    std::size_t n_features() const { return dims - 1; }

    /// Model-space feature vector for a link with raw features x at (hypothesized) distance d.
    std::vector<double> model_features(const feature_vector &x, double d) const;
    /// True when the model-space vector depends on the distance.
    bool features_depend_on_distance() const;

    double los_feature_density(std::span<const double> x) const;
    double nlos_feature_density(std::span<const double> x) const;
    /// N(u; 0, sigma^2) * f_LOS(x).
    double los_kernel(double u, std::span<const double> x, double sigma) const;
    /// (f_NLOS convolved with N(0, sigma^2) along b)(u, x).
    double nlos_kernel(double u, std::span<const double> x, double sigma) const;
    /// p_los * los_kernel + (1 - p_los) * nlos_kernel, never below floor_density.
    double likelihood(double u, std::span<const double> x, double sigma) const;
    /// E[b | x] under the NLOS component; NaN when f_NLOS(x) = 0.
    double nlos_conditional_mean(std::span<const double> x) const;
    /// NLOS bias density f_NLOS(b | x); histogram models give the containing-bin value.
    double nlos_bias_density(double b, std::span<const double> x) const;
    /// Unconditional mean NLOS bias.
    double nlos_bias_mean() const;

    /// Same model with the feature axes integrated out (dims 1).
    density_model bias_marginal() const;
    density_model with_p_los(double p) const;

    /// Throws domain_error when the components are inconsistent with dims/kind.
    void validate() const;
};

density_model build_density_model(std::span<const training_sample> samples, const density_options &opt);

/// Raw feature vector to model coordinates (used by both training and evaluation).
std::vector<double> select_features(const feature_vector &x, double d, std::size_t dims, parameterization param,
                                    const feature_model_params &params);

inline constexpr std::string_view density_magic = "UWBNLOS-DENSITY";
inline constexpr int density_format_version = 1;

void write_density_model(std::ostream &out, const density_model &m);
density_model read_density_model(std::istream &in);
void save_density_model(const std::filesystem::path &path, const density_model &m);
density_model load_density_model(const std::filesystem::path &path);

} // namespace uwbnlos
