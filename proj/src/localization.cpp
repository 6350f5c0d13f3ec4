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

#include "uwbnlos/localization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace uwbnlos
{

namespace
{

struct algorithm_info
{
    algorithm id;
    std::string_view key;
    std::string_view label;
    model_requirement model;
};

constexpr model_requirement no_model{false, estimator_kind::interpolated, 2, parameterization::distance_dependent};
constexpr model_requirement interp(std::size_t dims, parameterization p = parameterization::distance_dependent)
{
    return {true, estimator_kind::interpolated, dims, p};
}

constexpr std::array<algorithm_info, 8> algorithm_table = {{
    {algorithm::ls, "ls", "LS", no_model},
    {algorithm::ve, "ve", "VE", interp(2)},
    {algorithm::ml4d, "ml4d", "ML-4D", interp(4)},
    {algorithm::ml2d, "ml2d", "ML-2D", interp(2)},
    {algorithm::ml2did, "ml2did", "ML-2D-ID", interp(2, parameterization::distance_free)},
    {algorithm::ml4df, "ml4df", "ML-4D-F",
     {true, estimator_kind::fitted, 4, parameterization::distance_dependent}},
    {algorithm::ml4dit, "ml4dit", "ML-4D-IT", interp(4)},
    {algorithm::ml2dit, "ml2dit", "ML-2D-IT", interp(2)},
}};

const algorithm_info &info(algorithm a)
{
    for (const auto &i : algorithm_table)
        if (i.id == a)
            return i;
    throw domain_error("unknown algorithm");
}

// Smallest distance worth evaluating; vertices on top of an anchor would otherwise give sigma_w = 0.
constexpr double min_distance = 1e-3;

} // namespace

std::string_view to_string(algorithm a) { return info(a).key; }

std::string_view display_name(algorithm a) { return info(a).label; }

algorithm parse_algorithm(std::string_view s)
{
    for (const auto &i : algorithm_table)
        if (i.key == s || i.label == s)
            return i.id;
    throw config_error("unknown algorithm '" + std::string(s) + "'");
}

model_requirement required_model(algorithm a) { return info(a).model; }

std::size_t grid_spec::half_count() const
{
    return static_cast<std::size_t>(std::llround(half_extent / step));
}

vec2 grid_spec::vertex(std::size_t flat) const
{
    const std::size_t n = side();
    const auto h = static_cast<double>(half_count());
    const auto ix = static_cast<double>(flat % n);
    const auto iy = static_cast<double>(flat / n);
    return {center.x + (ix - h) * step, center.y + (iy - h) * step};
}

void grid_spec::validate() const
{
    if (!(step > 0.0))
        throw domain_error("grid step must be positive");
    if (!(half_extent >= 0.0))
        throw domain_error("grid half extent must be non-negative");
    if (half_extent / step > 1e5)
        throw domain_error("grid too large");
}

grid_spec default_grid(std::span<const vec2> anchors, double step, double half_extent)
{
    if (anchors.empty())
        throw domain_error("default grid needs anchors");
    vec2 c;
    for (const auto &a : anchors)
        c = c + a;
    c = (1.0 / static_cast<double>(anchors.size())) * c;
    grid_spec g;
    g.center = {step * std::round(c.x / step), step * std::round(c.y / step)};
    g.step = step;
    g.half_extent = half_extent;
    g.validate();
    return g;
}

std::vector<vec2> scenario::anchors() const
{
    std::vector<vec2> out;
    out.reserve(links.size());
    for (const auto &l : links)
        out.push_back(l.anchor);
    return out;
}

std::string scenario::validate() const
{
    if (links.size() < 3)
        throw domain_error("localization needs at least three anchors");
    for (const auto &l : links)
        if (!(l.tau > 0.0))
            throw domain_error("TOA observations must be positive");
    noise.validate();

    // Largest triangle spanned by any anchor triple, relative to the squared anchor spread.
    const auto a = anchors();
    double spread = 0.0, area = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j)
        {
            spread = std::max(spread, distance(a[i], a[j]));
            for (std::size_t k = j + 1; k < a.size(); ++k)
            {
                const vec2 u = a[j] - a[i], v = a[k] - a[i];
                area = std::max(area, 0.5 * std::abs(u.x * v.y - u.y * v.x));
            }
        }
    if (!(area > 1e-12 * spread * spread))
        throw domain_error("anchors are collinear");
    if (area < 1e-3 * spread * spread)
        return "anchors are nearly collinear";
    return {};
}

namespace
{

// Exhaustive row-major scan; strict comparison keeps the smallest index among ties.
template <typename Score, typename Better>
std::pair<std::size_t, double> scan(const grid_spec &grid, double worst, Score score, Better better)
{
    const std::size_t n = grid.side();
    const auto h = static_cast<double>(grid.half_count());
    std::size_t best = 0;
    double best_score = worst;
    bool first = true;
    for (std::size_t iy = 0; iy < n; ++iy)
    {
        const double y = grid.center.y + (static_cast<double>(iy) - h) * grid.step;
        for (std::size_t ix = 0; ix < n; ++ix)
        {
            const double x = grid.center.x + (static_cast<double>(ix) - h) * grid.step;
            const double s = score(x, y);
            if (first || better(s, best_score))
            {
                best = iy * n + ix;
                best_score = s;
                first = false;
            }
        }
    }
    return {best, best_score};
}

} // namespace

position_estimate ls_localize(const scenario &s, const grid_spec &grid)
{
    s.validate();
    grid.validate();
    const std::size_t m = s.links.size();
    std::vector<double> ax(m), ay(m), range(m);
    for (std::size_t i = 0; i < m; ++i)
    {
        ax[i] = s.links[i].anchor.x;
        ay[i] = s.links[i].anchor.y;
        range[i] = speed_of_light * s.links[i].tau;
    }
    const auto [idx, score] = scan(
        grid, std::numeric_limits<double>::infinity(),
        [&](double x, double y) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i)
            {
                const double dx = x - ax[i], dy = y - ay[i];
                const double r = range[i] - std::sqrt(dx * dx + dy * dy);
                acc += r * r;
            }
            return acc;
        },
        [](double a, double b) { return a < b; });

    position_estimate e;
    e.theta = grid.vertex(idx);
    e.grid_index = idx;
    e.score = score;
    e.algo = algorithm::ls;
    return e;
}

namespace
{

double link_loglik(const ranging_observation &obs, const density_model &model, const noise_model &noise,
                   const std::vector<double> &fixed_x, double d)
{
    d = std::max(d, min_distance);
    const double sigma = noise_stddev(noise, d);
    const double u = obs.tau - d / speed_of_light;
    if (model.features_depend_on_distance())
        return std::log(model.likelihood(u, model.model_features(obs.features, d), sigma));
    return std::log(model.likelihood(u, fixed_x, sigma));
}

struct distance_profile
{
    double d0 = 0.0;
    double inv_h = 0.0;
    std::vector<double> value;

    double operator()(double d) const
    {
        const double s = (d - d0) * inv_h;
        const double last = static_cast<double>(value.size() - 1);
        const double c = std::clamp(s, 0.0, last);
        const auto i = std::min(static_cast<std::size_t>(c), value.size() - 2);
        const double t = c - static_cast<double>(i);
        return value[i] + t * (value[i + 1] - value[i]);
    }
};

} // namespace

position_estimate ml_localize(const scenario &s, const density_model &model, const grid_spec &grid,
                              const ml_options &opt)
{
    s.validate();
    grid.validate();
    model.validate();
    const std::size_t m = s.links.size();
    std::vector<std::vector<double>> fixed_x(m);
    for (std::size_t i = 0; i < m; ++i)
        if (!model.features_depend_on_distance())
            fixed_x[i] = model.model_features(s.links[i].features, s.links[i].tau * speed_of_light);

    std::vector<double> ax(m), ay(m);
    for (std::size_t i = 0; i < m; ++i)
    {
        ax[i] = s.links[i].anchor.x;
        ay[i] = s.links[i].anchor.y;
    }

    std::pair<std::size_t, double> best;
    auto better = [](double a, double b) { return a > b; };
    const double worst = -std::numeric_limits<double>::infinity();
    if (opt.tabulate)
    {
        const double hgrid = grid.step * static_cast<double>(grid.half_count());
        const double h = grid.step * opt.profile_spacing_fraction;
        if (!(h > 0.0))
            throw domain_error("profile spacing must be positive");
        std::vector<distance_profile> prof(m);
        for (std::size_t i = 0; i < m; ++i)
        {
            // Distance range from the anchor to the grid square.
            const double cx = std::clamp(ax[i], grid.center.x - hgrid, grid.center.x + hgrid);
            const double cy = std::clamp(ay[i], grid.center.y - hgrid, grid.center.y + hgrid);
            const double dmin = std::hypot(ax[i] - cx, ay[i] - cy);
            const double dmax = std::hypot(std::abs(ax[i] - grid.center.x) + hgrid, std::abs(ay[i] - grid.center.y) + hgrid);
            const auto n = static_cast<std::size_t>(std::ceil((dmax - dmin) / h)) + 2;
            auto &p = prof[i];
            p.d0 = dmin;
            p.inv_h = 1.0 / h;
            p.value.resize(n);
            for (std::size_t k = 0; k < n; ++k)
                p.value[k] = link_loglik(s.links[i], model, s.noise, fixed_x[i], dmin + h * static_cast<double>(k));
        }
        best = scan(
            grid, worst,
            [&](double x, double y) {
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                {
                    const double dx = x - ax[i], dy = y - ay[i];
                    acc += prof[i](std::sqrt(dx * dx + dy * dy));
                }
                return acc;
            },
            better);
    }
    else
    {
        best = scan(
            grid, worst,
            [&](double x, double y) {
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                {
                    const double dx = x - ax[i], dy = y - ay[i];
                    acc += link_loglik(s.links[i], model, s.noise, fixed_x[i], std::sqrt(dx * dx + dy * dy));
                }
                return acc;
            },
            better);
    }

    const double all_floor = static_cast<double>(m) * std::log(model.floor_density);
    if (!(best.second > all_floor + 1e-9))
        throw degenerate_likelihood_error("likelihood is at the floor density on every grid vertex (scenario with " +
                                          std::to_string(m) + " links, grid centered at (" +
                                          std::to_string(grid.center.x) + ", " + std::to_string(grid.center.y) + "))");

    position_estimate e;
    e.theta = grid.vertex(best.first);
    e.grid_index = best.first;
    e.score = best.second;
    e.algo = algorithm::ml2d;
    return e;
}

link_correction iterative_bias_correct(const ranging_observation &obs, const density_model &model,
                                       const noise_model &noise, const iteration_options &opt)
{
    if (opt.max_iters == 0)
        throw domain_error("max_iters must be at least 1");
    model.validate();
    const double p = model.p_los;

    link_correction c;
    double b = 0.0;
    for (std::size_t it = 1; it <= opt.max_iters; ++it)
    {
        const double d = std::max(speed_of_light * (obs.tau - b), min_distance);
        const double sigma = noise_stddev(noise, d);
        const auto x = model.model_features(obs.features, d);

        const double k_los = p > 0.0 ? p * model.los_kernel(b, x, sigma) : 0.0;
        const double k_nlos = p < 1.0 ? (1.0 - p) * model.nlos_kernel(b, x, sigma) : 0.0;
        const double p_nlos = (k_los + k_nlos > 0.0) ? k_nlos / (k_los + k_nlos) : 1.0 - p;

        double next = 0.0;
        if (p_nlos > 0.0)
        {
            double mean = model.nlos_conditional_mean(x);
            if (!std::isfinite(mean))
                mean = model.nlos_bias_mean();
            next = p_nlos * mean;
        }

        c.iterations = it;
        c.p_los_posterior = 1.0 - p_nlos;
        const double change = std::abs(next - b);
        b = next;
        if (change < opt.tol)
        {
            c.converged = true;
            break;
        }
    }
    c.bias = b;
    c.tau_corrected = obs.tau - b;
    return c;
}

position_estimate corrected_ls_localize(const scenario &s, const density_model &model, const grid_spec &grid,
                                        const iteration_options &opt)
{
    scenario corrected = s;
    std::vector<double> bias;
    std::vector<bool> conv;
    for (auto &l : corrected.links)
    {
        const auto c = iterative_bias_correct(l, model, s.noise, opt);
        l.tau = c.tau_corrected;
        bias.push_back(c.bias);
        conv.push_back(c.converged);
    }
    auto e = ls_localize(corrected, grid);
    e.bias_estimates = std::move(bias);
    e.converged = std::move(conv);
    return e;
}

position_estimate ve_localize(const scenario &s, const density_model &model, const grid_spec &grid,
                              const iteration_options &opt)
{
    auto e = corrected_ls_localize(s, model.dims == 1 ? model : model.bias_marginal(), grid, opt);
    e.algo = algorithm::ve;
    return e;
}

position_estimate ml_it_localize(const scenario &s, const density_model &model, const grid_spec &grid,
                                 const iteration_options &opt)
{
    auto e = corrected_ls_localize(s, model, grid, opt);
    e.algo = model.dims == 4 ? algorithm::ml4dit : algorithm::ml2dit;
    return e;
}

} // namespace uwbnlos
