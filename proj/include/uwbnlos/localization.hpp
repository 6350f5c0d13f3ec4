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

#include "uwbnlos/common.hpp"
#include "uwbnlos/density_model.hpp"
#include "uwbnlos/ranging_model.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace uwbnlos
{

enum class algorithm
{
    ls,
    ve,
    ml4d,
    ml2d,
    ml2did,
    ml4df,
    ml4dit,
    ml2dit
};

inline constexpr std::array<algorithm, 8> all_algorithms = {algorithm::ls,     algorithm::ve,    algorithm::ml4d,
                                                            algorithm::ml2d,   algorithm::ml2did, algorithm::ml4df,
                                                            algorithm::ml4dit, algorithm::ml2dit};

std::string_view to_string(algorithm a);
algorithm parse_algorithm(std::string_view s);
/// Display label, e.g. "ML-2D-IT".
std::string_view display_name(algorithm a);

/// The density model each algorithm needs (ls needs none). VE uses the bias marginal of the 2-D one.
struct model_requirement
{
    bool needed = false;
    estimator_kind kind = estimator_kind::interpolated;
    std::size_t dims = 2;
    parameterization param = parameterization::distance_dependent;
};
model_requirement required_model(algorithm a);

/// Square grid of (2n + 1)^2 vertices, n = round(half_extent / step), indexed row-major with y outer.
struct grid_spec
{
    vec2 center;
    double half_extent = 6.0;
    double step = 0.01;

    std::size_t half_count() const;
    std::size_t side() const { return 2 * half_count() + 1; }
    std::size_t vertex_count() const { return side() * side(); }
    vec2 vertex(std::size_t flat) const;
    void validate() const;
};

/// Grid centered at the anchor centroid snapped to a multiple of the step, so the origin and every
/// other step-aligned point is a vertex.
grid_spec default_grid(std::span<const vec2> anchors, double step = 0.01, double half_extent = 6.0);

struct scenario
{
    std::vector<ranging_observation> links;
    noise_model noise;

    std::vector<vec2> anchors() const;
    /// At least three anchors, not collinear; returns a warning string for near-collinear layouts.
    std::string validate() const;
};

struct position_estimate
{
    vec2 theta;
    double score = 0.0; // squared-residual sum (m^2) for LS-type, log-likelihood for ML
    algorithm algo = algorithm::ls;
    std::size_t grid_index = 0;
    std::vector<double> bias_estimates; // per link, iterative variants only
    std::vector<bool> converged;        // per link, iterative variants only
};

class degenerate_likelihood_error : public domain_error
{
public:
    using domain_error::domain_error;
};

position_estimate ls_localize(const scenario &s, const grid_spec &grid);

struct ml_options
{
    bool tabulate = true;                // per-link log-likelihood profiles over distance
    double profile_spacing_fraction = 0.25; // profile spacing as a fraction of the grid step
};

/// Grid argmax of sum_i log likelihood(tau_i - d_i / c0, features_i, sigma_w(d_i)).
position_estimate ml_localize(const scenario &s, const density_model &model, const grid_spec &grid,
                              const ml_options &opt = {});

struct iteration_options
{
    std::size_t max_iters = 50;
    double tol = 1e-12; // s
};

struct link_correction
{
    double bias = 0.0;
    double tau_corrected = 0.0;
    double p_los_posterior = 1.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Link-level alternation between the distance estimate c0 (tau - b), the LOS/NLOS posterior at the
/// residual b with sigma_w of that distance, and b = P(NLOS) * E_NLOS[b | features].
link_correction iterative_bias_correct(const ranging_observation &obs, const density_model &model,
                                       const noise_model &noise, const iteration_options &opt = {});

/// Corrects every link with iterative_bias_correct, then runs ls_localize on the corrected TOAs.
position_estimate corrected_ls_localize(const scenario &s, const density_model &model, const grid_spec &grid,
                                        const iteration_options &opt = {});
/// Iterative correction with the bias marginal only.
position_estimate ve_localize(const scenario &s, const density_model &model, const grid_spec &grid,
                              const iteration_options &opt = {});
position_estimate ml_it_localize(const scenario &s, const density_model &model, const grid_spec &grid,
                                 const iteration_options &opt = {});

} // namespace uwbnlos
