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

#include "catch_amalgamated.hpp"

#include "../support/feature_oracles.hpp"
#include "../support/test_support.hpp"
#include "uwbnlos/common.hpp"
#include "uwbnlos/feature_extract.hpp"

#include <cmath>

using namespace uwbnlos;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{

void check_close(double got, double want, double rel)
{
    if (want == 0.0)
        CHECK(std::abs(got) <= 1e-30);
    else
        CHECK_THAT(got, WithinRel(want, rel));
}

} // namespace

TEST_CASE("features of analytic signals match closed forms", "[features]")
{
    for (const auto &sig : test::analytic_signals())
    {
        INFO(sig.name);
        const auto f = extract_all(sig.record);
        const auto got = f.as_array(), want = sig.expected.as_array();
        for (std::size_t j = 0; j < feature_vector::size; ++j)
        {
            INFO(feature_names[j]);
            check_close(got[j], want[j], 1e-9);
        }
    }
}

TEST_CASE("amplitude scaling and time shift act on the expected features", "[features]")
{
    const auto base = test::analytic_signals()[3].record;
    auto scaled = base;
    for (double &s : scaled.samples)
        s *= -3.0;
    auto shifted = base;
    shifted.t0 += 7e-9;

    const auto f = extract_all(base), g = extract_all(scaled), k = extract_all(shifted);
    CHECK_THAT(g.r_max, WithinRel(3.0 * f.r_max, 1e-14));
    CHECK_THAT(g.energy, WithinRel(9.0 * f.energy, 1e-14));
    CHECK_THAT(g.tau_m, WithinRel(f.tau_m, 1e-14));
    CHECK_THAT(g.tau_ds, WithinRel(f.tau_ds, 1e-12));
    CHECK_THAT(g.t_rise, WithinRel(f.t_rise, 1e-12));
    CHECK_THAT(g.kurtosis, WithinRel(f.kurtosis, 1e-12));

    CHECK_THAT(k.tau_m, WithinRel(f.tau_m + 7e-9, 1e-14));
    CHECK_THAT(k.tau_ds, WithinRel(f.tau_ds, 1e-9));
    CHECK_THAT(k.t_rise, WithinRel(f.t_rise, 1e-9));
    CHECK(k.energy == f.energy);
}

TEST_CASE("degenerate waveforms", "[features]")
{
    const auto flat = test::make_record(std::vector<double>(50, 0.3), 1e9);
    CHECK_THROWS_AS(kurtosis(flat), domain_error);
    CHECK(std::isnan(extract_all(flat).kurtosis));
    CHECK(rise_time(flat) == 0.0);

    const auto zero = test::make_record(std::vector<double>(50, 0.0), 1e9);
    CHECK_THROWS_AS(mean_excess_delay(zero), domain_error);
    CHECK_THROWS_AS(rise_time(zero), domain_error);
    CHECK_THROWS_AS(first_crossing(flat, 0.3), domain_error);
    CHECK_THROWS_AS(max_amplitude(test::make_record({}, 1e9)), domain_error);
    CHECK_THROWS_AS(kurtosis(flat, 49, 1), domain_error);
}

TEST_CASE("kurtosis window selects a sub-range", "[features]")
{
    auto sig = test::rectangular_pulse();
    // Window [40, 140) holds 60 samples at A and 40 at zero; endpoints carry half weight and are zero.
    const double k = kurtosis(sig.record, 40, 101);
    CHECK_THAT(k, WithinRel(test::two_point_kurtosis(60.0 / 100.0), 1e-12));
}

TEST_CASE("first crossing interpolates linearly", "[features]")
{
    const auto w = test::make_record({0.0, 0.2, 0.6, 1.0}, 1e9, 1e-9);
    CHECK_THAT(first_crossing(w, 0.4), WithinRel(1e-9 + 1.5e-9, 1e-14));
    CHECK_THAT(first_crossing(w, 0.1), WithinRel(1e-9 + 0.5e-9, 1e-14));
    // Already above the level at sample 0.
    CHECK(first_crossing(w, -1.0) == 1e-9);
}

TEST_CASE("correlation coefficient", "[features]")
{
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10}, c{5, 4, 3, 2, 1}, k{1, 1, 1, 1, 1};
    CHECK_THAT(correlation_coefficient(a, b), WithinAbs(1.0, 1e-15));
    CHECK_THAT(correlation_coefficient(a, c), WithinAbs(-1.0, 1e-15));
    const std::vector<double> d{1, -1, 1, -1, 0};
    // Direct: cov(a, d) = sum (a - 3) d / n
    CHECK_THAT(correlation_coefficient(a, d), WithinAbs((-2.0 + 1.0 - 1.0) / std::sqrt(10.0 * 4.0), 1e-15));
    CHECK_THROWS_AS(correlation_coefficient(a, k), domain_error);
    CHECK_THROWS_AS(correlation_coefficient(a, std::vector<double>{1, 2}), domain_error);
}

TEST_CASE("line fit recovers exact lines and classical standard errors", "[features]")
{
    const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
    auto f = fit_line(x, y);
    CHECK_THAT(f.slope, WithinAbs(2.0, 1e-14));
    CHECK_THAT(f.intercept, WithinAbs(1.0, 1e-14));
    CHECK_THAT(f.residual_rms, WithinAbs(0.0, 1e-14));

    // Residuals +-1 alternate: rss = 4, s^2 = 2, sxx = 5.
    const std::vector<double> y2{4, 4, 8, 8};
    f = fit_line(x, y2);
    CHECK_THAT(f.slope, WithinAbs(1.6, 1e-14));
    const double rss = [&] {
        double r = 0;
        for (std::size_t i = 0; i < 4; ++i)
            r += std::pow(y2[i] - f.intercept - f.slope * x[i], 2);
        return r;
    }();
    CHECK_THAT(f.slope_stderr, WithinRel(std::sqrt(rss / 2.0 / 5.0), 1e-12));
    CHECK_THAT(f.intercept_stderr, WithinRel(std::sqrt(rss / 2.0 * (0.25 + 6.25 / 5.0)), 1e-12));
    CHECK_THROWS_AS(fit_line(std::vector<double>{1, 1}, std::vector<double>{1, 2}), domain_error);
}

TEST_CASE("distance feature models and the distance-free map", "[features]")
{
    std::vector<feature_vector> xs;
    std::vector<double> ds;
    for (int i = 0; i < 20; ++i)
    {
        const double d = 1.0 + 0.2 * i;
        feature_vector x;
        x.r_max = 0.9 - 0.1 * d;
        x.tau_m = 3.3e-9 * d;
        x.tau_ds = 2e-18 + 5e-18 * d;
        xs.push_back(x);
        ds.push_back(d);
    }
    const auto fit = fit_feature_models(xs, ds);
    CHECK_THAT(fit.params.r_max_slope, WithinRel(0.1, 1e-10));
    CHECK_THAT(fit.params.tau_ds_offset, WithinRel(2e-18, 1e-9));
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        const auto f = to_distance_free(xs[i], ds[i], fit.params);
        CHECK_THAT(f.r_max0, WithinRel(0.9, 1e-10));
        CHECK_THAT(f.tau_m_slope, WithinRel(3.3e-9, 1e-12));
        CHECK_THAT(f.tau_ds_slope, WithinRel(5e-18, 1e-8));
    }
    CHECK_THROWS_AS(to_distance_free(xs[0], 0.0, fit.params), domain_error);

    // A rising r_max trend is clipped to a zero slope.
    for (auto &x : xs)
        x.r_max = 1.0 - x.r_max;
    CHECK(fit_feature_models(xs, ds).params.r_max_slope == 0.0);
}

TEST_CASE("default corpus features are finite and NLOS delay spread is larger", "[features]")
{
    double los = 0.0, nlos = 0.0;
    std::size_t nl = 0, nn = 0;
    for (const auto &s : test::default_training())
    {
        for (double v : s.x.as_array())
            REQUIRE(std::isfinite(v));
        (s.state == channel_state::los ? los : nlos) += s.x.tau_ds;
        (s.state == channel_state::los ? nl : nn) += 1;
    }
    CHECK(nlos / static_cast<double>(nn) > los / static_cast<double>(nl));
}
