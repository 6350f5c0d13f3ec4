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

#include "../support/density_oracles.hpp"
#include "../support/test_support.hpp"
#include "uwbnlos/common.hpp"
#include "uwbnlos/density_model.hpp"
#include "uwbnlos/fitted_density.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace uwbnlos;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{

density_model make_model(estimator_kind kind, std::size_t dims,
                         parameterization param = parameterization::distance_dependent)
{
    density_options o;
    o.kind = kind;
    o.dims = dims;
    o.param = param;
    return build_density_model(test::default_training(), o);
}

} // namespace

TEST_CASE("convolve_bias_axis conserves mass and matches quadrature", "[density]")
{
    const histogram_axis axis{0.5, 0.2, 7};
    const std::vector<double> profile{0.3, 1.2, 0.0, 0.9, 2.0, 0.4, 0.2};
    const double sigma = 0.15;

    double mass = 0.0;
    for (double v : profile)
        mass += v * axis.width;

    // Trapezoid in u over a wide window.
    const double lo = axis.lower - 12.0 * sigma, hi = axis.upper() + 12.0 * sigma;
    const std::size_t n = 200001;
    const double du = (hi - lo) / static_cast<double>(n - 1);
    double integral = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        integral += (i == 0 || i + 1 == n ? 0.5 : 1.0) *
                    convolve_bias_axis(axis, profile, 1, lo + du * static_cast<double>(i), sigma);
    CHECK_THAT(integral * du, WithinRel(mass, 1e-9));

    for (double u : {-0.2, 0.5, 0.77, 1.1, 1.9, 2.5})
        CHECK_THAT(convolve_bias_axis(axis, profile, 1, u, sigma),
                   WithinAbs(test::convolution_quadrature(axis, profile, u, sigma), 1e-6));

    // Strided access reads every other entry.
    std::vector<double> strided(2 * profile.size(), -1.0);
    for (std::size_t j = 0; j < profile.size(); ++j)
        strided[2 * j] = profile[j];
    CHECK(convolve_bias_axis(axis, strided, 2, 1.0, sigma) == convolve_bias_axis(axis, profile, 1, 1.0, sigma));
    CHECK_THROWS_AS(convolve_bias_axis(axis, profile, 1, 1.0, 0.0), domain_error);
}

TEST_CASE("convolution is stable deep in the null region", "[density]")
{
    const histogram_axis axis{1e-9, 1e-10, 20};
    const std::vector<double> profile(20, 5e8);
    // Far left: both CDF values underflow to zero rather than cancelling.
    CHECK(convolve_bias_axis(axis, profile, 1, 0.0, 1e-13) == 0.0);
    // Far right of the support the mass is fully captured.
    const double v = convolve_bias_axis(axis, profile, 1, 10e-9, 1e-10);
    CHECK(v >= 0.0);
    CHECK(v < 1e-3);
    // Inside the flat part, the convolution equals the density.
    CHECK_THAT(convolve_bias_axis(axis, profile, 1, 2e-9, 1e-11), WithinRel(5e8, 1e-12));
}

TEST_CASE("histogram models integrate to one and respect the wall delay", "[density]")
{
    for (auto kind : {estimator_kind::raw, estimator_kind::interpolated})
        for (std::size_t dims : {2u, 4u})
            for (auto param : {parameterization::distance_dependent, parameterization::distance_free})
            {
                INFO(to_string(kind) << " " << dims << "D " << to_string(param));
                const auto m = make_model(kind, dims, param);
                CHECK_THAT(test::histogram_mass(m.nlos_hist), WithinAbs(1.0, 1e-9));
                CHECK_THAT(test::histogram_mass(m.los_hist), WithinAbs(1.0, 1e-9));
                CHECK(m.nlos_hist.axis(0).lower == m.bias_floor);
                CHECK(m.nlos_hist.dims() == dims);
                CHECK(m.los_hist.dims() == dims - 1);
                const std::size_t bins = dims == 4 ? 12 : 25;
                CHECK(m.nlos_hist.axis(0).bins == (kind == estimator_kind::raw ? bins : 4 * bins));
                if (kind == estimator_kind::raw)
                    CHECK(m.nlos_hist.clamped_samples == 0);
            }
}

TEST_CASE("fitted models integrate to one by whitened quadrature", "[density]")
{
    for (std::size_t dims : {2u, 4u})
    {
        const auto m = make_model(estimator_kind::fitted, dims);
        INFO(dims << "D");
        CHECK_THAT(test::fitted_mass(*m.los_fit), WithinAbs(1.0, 1e-6));
        CHECK_THAT(test::fitted_mass(*m.nlos_fit), WithinAbs(1.0, 1e-6));
        CHECK(m.nlos_fit->bias_shift == m.bias_floor);
        CHECK(m.los_fit->heldout_count == (105 + 1) / 5);
        CHECK(std::isfinite(m.nlos_fit->heldout_loglik));
    }
    const auto marg = make_model(estimator_kind::fitted, 2).bias_marginal();
    CHECK_THAT(test::fitted_mass(*marg.nlos_fit), WithinAbs(1.0, 1e-9));
}

TEST_CASE("mixture likelihood integrates to one over residual and features", "[density]")
{
    for (auto kind : {estimator_kind::raw, estimator_kind::interpolated})
    {
        const auto m = make_model(kind, 2).with_p_los(0.3);
        INFO(to_string(kind));
        CHECK_THAT(test::mixture_mass_2d(m, 0.3e-9), WithinAbs(1.0, 1e-6));
    }
}

TEST_CASE("fitted feature density and convolution agree with quadrature in b", "[density]")
{
    const auto m = make_model(estimator_kind::fitted, 4);
    const auto &f = *m.nlos_fit;
    const auto &t = test::default_training();
    const auto [s, w] = test::gauss_legendre(64, 0.0, 45.0);
    for (std::size_t i : {120u, 150u, 200u, 270u})
    {
        const auto x = m.model_features(t[i].x, t[i].d);
        double fx = 0.0, first = 0.0;
        for (std::size_t q = 0; q < s.size(); ++q)
        {
            const double b = f.bias_shift + s[q] / f.bias_rate;
            const double v = w[q] * f.joint_density(b, x) / f.bias_rate;
            fx += v;
            first += v * b;
        }
        CHECK_THAT(f.feature_density(x), WithinRel(fx, 1e-8));
        CHECK_THAT(f.conditional_mean_bias(x), WithinRel(first / fx, 1e-8));

        // Convolution with N(0, sigma^2): Gauss-Legendre over the bias around u.
        const double sigma = 0.4e-9;
        for (double u : {f.bias_shift - 1e-9, f.bias_shift + 0.5e-9, f.bias_shift + 3e-9})
        {
            const double a = std::max(f.bias_shift, u - 10.0 * sigma), c = u + 10.0 * sigma;
            const auto [bq, bw] = test::gauss_legendre(200, a, c);
            double conv = 0.0;
            for (std::size_t q = 0; q < bq.size(); ++q)
                conv += bw[q] * f.joint_density(bq[q], x) * normal_pdf((u - bq[q]) / sigma) / sigma;
            CHECK_THAT(f.convolved(u, x, sigma), WithinRel(conv, 1e-7));
        }
    }
}

TEST_CASE("fit_analytic recovers parameters of its own family", "[density]")
{
    const double b0 = 1e-9, rate = 1.0 / 0.8e-9;
    Eigen::Vector3d mu0(0.8, 2e-8, 4e-17), mu1(-0.05 / 1e-9, 3.0, 2e-17 / 1e-9);
    Eigen::Vector3d sd(0.04, 2.5e-9, 1.5e-17);
    Eigen::Matrix3d corr;
    corr << 1.0, -0.6, 0.3, -0.6, 1.0, 0.5, 0.3, 0.5, 1.0;
    const Eigen::Matrix3d cov = sd.asDiagonal() * corr * sd.asDiagonal();
    const Eigen::Matrix3d L = cov.llt().matrixL();

    auto rng = make_stream(99, 0);
    std::exponential_distribution<double> ex(rate);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t n = 10000;
    std::vector<double> bs(n);
    std::vector<std::vector<double>> xs(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        bs[i] = b0 + ex(rng);
        const Eigen::Vector3d z(g(rng), g(rng), g(rng));
        const Eigen::Vector3d x = mu0 + mu1 * bs[i] + L * z;
        xs[i] = {x[0], x[1], x[2]};
    }
    const auto f = fit_analytic(channel_state::nlos, bs, xs, b0);
    CHECK_THAT(f.bias_rate, WithinRel(rate, 0.05));
    const Eigen::Vector3d m0 = f.scale.cwiseProduct(f.mu0), m1 = f.scale.cwiseProduct(f.mu1);
    const Eigen::Matrix3d c = f.scale.asDiagonal() * f.cov * f.scale.asDiagonal();
    for (int j = 0; j < 3; ++j)
    {
        CHECK_THAT(m0[j], WithinRel(mu0[j], 0.05));
        CHECK_THAT(m1[j], WithinRel(mu1[j], 0.05));
        for (int k = 0; k < 3; ++k)
            CHECK(std::abs(c(j, k) - cov(j, k)) <= 0.05 * std::sqrt(cov(j, j) * cov(k, k)));
    }
    CHECK_FALSE(f.regularized);
    CHECK(f.heldout_count == n / 5);
}

TEST_CASE("LOS fit has its bias support at zero only", "[density]")
{
    std::vector<double> b(20, 0.0);
    std::vector<std::vector<double>> x(20);
    for (std::size_t i = 0; i < 20; ++i)
        x[i] = {std::sin(1.0 * i), std::cos(2.0 * i)};
    const auto f = fit_analytic(channel_state::los, b, x, 1e-9);
    CHECK(f.mu1.isZero());
    CHECK(f.conditional_mean_bias(x[0]) == 0.0);
    b[3] = 1e-12;
    CHECK_THROWS_AS(fit_analytic(channel_state::los, b, x, 1e-9), domain_error);
    b[3] = 0.0;
    CHECK_THROWS_AS(fit_analytic(channel_state::nlos, b, x, 1e-9), domain_error);
    CHECK_THROWS_AS(fit_analytic(channel_state::los, std::span(b).first(5), std::span(x).first(5), 1e-9), domain_error);
}

TEST_CASE("collinear features trigger diagonal loading with a warning", "[density]")
{
    std::vector<double> b(30);
    std::vector<std::vector<double>> x(30);
    for (std::size_t i = 0; i < 30; ++i)
    {
        b[i] = 1e-9 + 1e-10 * static_cast<double>(i % 7);
        const double v = std::sin(0.7 * static_cast<double>(i));
        x[i] = {v, 2.0 * v};
    }
    const auto f = fit_analytic(channel_state::nlos, b, x, 1e-9);
    CHECK(f.regularized);
    CHECK_FALSE(f.warning.empty());
    CHECK(std::isfinite(f.feature_density(x[0])));
}

TEST_CASE("NLOS kernel vanishes in the null region while LOS peaks at zero", "[density]")
{
    const auto m = make_model(estimator_kind::raw, 2);
    const auto &t = test::default_training();
    const auto x = m.model_features(t[200].x, t[200].d);
    CHECK(m.nlos_kernel(0.0, x, 1e-13) == 0.0);
    CHECK(m.nlos_kernel(0.2 * m.bias_floor, x, 0.05 * m.bias_floor) < 1e-20 * m.nlos_feature_density(x) / m.bias_floor);
    CHECK(m.likelihood(-1.0, x, 1e-9) == m.floor_density);
    CHECK_THROWS_AS(m.likelihood(0.0, std::vector<double>{1.0, 2.0}, 1e-9), domain_error);
}

TEST_CASE("conditional mean matches a brute-force bias integral", "[density]")
{
    for (auto kind : {estimator_kind::raw, estimator_kind::interpolated})
        for (std::size_t dims : {2u, 4u})
        {
            const auto m = make_model(kind, dims);
            const auto &ax = m.nlos_hist.axis(0);
            const auto &t = test::default_training();
            for (std::size_t i = 105; i < t.size(); i += 17)
            {
                const auto x = m.model_features(t[i].x, t[i].d);
                if (!(m.nlos_feature_density(x) > 0.0))
                    continue;
                INFO(to_string(kind) << " " << dims << "D record " << i);
                CHECK_THAT(m.nlos_conditional_mean(x),
                           WithinRel(test::brute_force_conditional_mean(m, x, ax.lower, ax.upper(), 2000 * ax.bins), 1e-6));
            }
        }
}

TEST_CASE("bias marginal keeps the unconditional mean", "[density]")
{
    for (auto kind : {estimator_kind::raw, estimator_kind::interpolated, estimator_kind::fitted})
    {
        const auto m = make_model(kind, 4);
        const auto b = m.bias_marginal();
        CHECK(b.dims == 1);
        CHECK(b.model_features({}, 3.0).empty());
        CHECK_THAT(b.nlos_conditional_mean({}), WithinRel(m.nlos_bias_mean(), 1e-9));
        if (kind != estimator_kind::fitted)
            CHECK_THAT(test::histogram_mass(b.nlos_hist), WithinAbs(1.0, 1e-9));
        CHECK(b.los_feature_density({}) == 1.0);
    }
    // Raw mean equals the mean of the binned training biases.
    const auto m = make_model(estimator_kind::raw, 2);
    const auto &ax = m.nlos_hist.axis(0);
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto &s : test::default_training())
        if (s.state == channel_state::nlos)
        {
            acc += ax.center(*ax.locate(s.b));
            ++n;
        }
    CHECK_THAT(m.nlos_bias_mean(), WithinRel(acc / static_cast<double>(n), 1e-12));
}

TEST_CASE("density model files round-trip", "[density]")
{
    for (auto kind : {estimator_kind::raw, estimator_kind::interpolated, estimator_kind::fitted})
        for (std::size_t dims : {2u, 4u})
        {
            const auto m = make_model(kind, dims, parameterization::distance_free).with_p_los(0.25);
            std::stringstream ss;
            write_density_model(ss, m);
            const auto back = read_density_model(ss);
            CHECK(back.kind == m.kind);
            CHECK(back.dims == m.dims);
            CHECK(back.param == m.param);
            CHECK(back.p_los == 0.25);
            CHECK(back.feature_params.r_max_slope == m.feature_params.r_max_slope);
            CHECK(back.los_hist == m.los_hist);
            CHECK(back.nlos_hist == m.nlos_hist);
            const auto &t = test::default_training();
            for (std::size_t i : {3u, 150u})
            {
                const auto x = m.model_features(t[i].x, t[i].d);
                CHECK(back.likelihood(1.5e-9, x, 0.5e-9) == m.likelihood(1.5e-9, x, 0.5e-9));
            }
        }
    const auto marg = make_model(estimator_kind::raw, 2).bias_marginal();
    std::stringstream ss;
    write_density_model(ss, marg);
    CHECK(ss.str().find("form = point_mass") != std::string::npos);
    CHECK(read_density_model(ss).nlos_hist == marg.nlos_hist);
}

TEST_CASE("density model reader reports the failing line", "[density]")
{
    const auto m = make_model(estimator_kind::raw, 2);
    std::stringstream ss;
    write_density_model(ss, m);
    const auto text = ss.str();

    auto expect_line = [](const std::string &s, const std::string &needle) {
        std::istringstream in(s);
        try
        {
            read_density_model(in);
            FAIL("accepted a damaged model");
        }
        catch (const config_error &e)
        {
            CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring(needle));
        }
    };
    expect_line("WRONG\n", "line 1");
    std::string v = text;
    v.replace(v.find("version = 1"), 11, "version = 9");
    expect_line(v, "line 2");
    std::string est = text;
    est.replace(est.find("estimator = raw"), 15, "estimator = kde");
    expect_line(est, "line 3");
    std::string neg = text;
    const auto cell = neg.find("+", neg.find("cells ="));
    neg[cell] = '-';
    neg[cell + 1] = '1';
    expect_line(neg, "negative");
    expect_line(text.substr(0, text.find('\n', text.size() / 2) + 1), "end of file");
}

TEST_CASE("builder rejects unusable inputs", "[density]")
{
    density_options o;
    o.dims = 3;
    CHECK_THROWS_AS(build_density_model(test::default_training(), o), domain_error);
    o.dims = 2;
    o.p_los = 1.5;
    CHECK_THROWS_AS(build_density_model(test::default_training(), o), domain_error);
    o.p_los = 0.5;
    std::vector<training_sample> only_los(test::default_training().begin(), test::default_training().begin() + 105);
    CHECK_THROWS_AS(build_density_model(only_los, o), domain_error);
    CHECK_THROWS_AS(make_model(estimator_kind::raw, 2).with_p_los(-0.1), domain_error);
}
