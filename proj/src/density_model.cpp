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

#include "uwbnlos/density_model.hpp"

#include "uwbnlos/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace uwbnlos
{

std::string_view to_string(estimator_kind k)
{
    switch (k)
    {
    case estimator_kind::raw:
        return "raw";
    case estimator_kind::interpolated:
        return "interp";
    case estimator_kind::fitted:
        return "fitted";
    }
    return "?";
}

std::string_view to_string(parameterization p)
{
    return p == parameterization::distance_dependent ? "dist" : "distfree";
}

estimator_kind parse_estimator_kind(std::string_view s)
{
    if (s == "raw")
        return estimator_kind::raw;
    if (s == "interp" || s == "interpolated")
        return estimator_kind::interpolated;
    if (s == "fitted")
        return estimator_kind::fitted;
    throw config_error("unknown estimator '" + std::string(s) + "' (expected raw, interp or fitted)");
}

parameterization parse_parameterization(std::string_view s)
{
    if (s == "dist" || s == "distance_dependent")
        return parameterization::distance_dependent;
    if (s == "distfree" || s == "distance_free")
        return parameterization::distance_free;
    throw config_error("unknown parameterization '" + std::string(s) + "' (expected dist or distfree)");
}

namespace
{

// Tail mass beyond |z|; the side follows from the sign of z.
double normal_tail(double z) { return 0.5 * std::erfc(std::abs(z) / std::sqrt(2.0)); }

// Phi(a) - Phi(b) for a >= b from the tails ta, tb, choosing the form that avoids cancellation.
double normal_mass_between(double a, double ta, double b, double tb)
{
    if (b > 0.0)
        return tb - ta;
    if (a < 0.0)
        return ta - tb;
    return 1.0 - ta - tb;
}

} // namespace

double convolve_bias_axis(const histogram_axis &bias_axis, std::span<const double> profile, std::size_t stride,
                          double u, double sigma)
{
    if (!(sigma > 0.0))
        throw domain_error("bias convolution needs sigma > 0");
    if (stride == 0 || profile.size() < (bias_axis.bins - 1) * stride + 1)
        throw domain_error("bias profile shorter than its axis");
    // Neighbouring bins share an edge, so each tail is evaluated once.
    double acc = 0.0;
    double hi = (u - bias_axis.edge(0)) / sigma;
    double t_hi = std::nan("");
    for (std::size_t j = 0; j < bias_axis.bins; ++j)
    {
        const double lo = (u - bias_axis.edge(j + 1)) / sigma;
        const double f = profile[j * stride];
        double t_lo = std::nan("");
        if (f != 0.0)
        {
            if (std::isnan(t_hi))
                t_hi = normal_tail(hi);
            t_lo = normal_tail(lo);
            acc += f * normal_mass_between(hi, t_hi, lo, t_lo);
        }
        hi = lo;
        t_hi = t_lo;
    }
    return acc;
}

std::vector<double> select_features(const feature_vector &x, double d, std::size_t dims, parameterization param,
                                    const feature_model_params &params)
{
    const bool free = param == parameterization::distance_free;
    switch (dims)
    {
    case 1:
        return {};
    case 2:
        return {free ? to_distance_free(x, d, params).tau_ds_slope : x.tau_ds};
    case 4:
        if (free)
        {
            const auto f = to_distance_free(x, d, params);
            return {f.r_max0, f.tau_m_slope, f.tau_ds_slope};
        }
        return {x.r_max, x.tau_m, x.tau_ds};
    default:
        throw domain_error("density models support dims 1, 2 or 4");
    }
}

std::vector<double> density_model::model_features(const feature_vector &x, double d) const
{
    return select_features(x, d, dims, param, feature_params);
}

bool density_model::features_depend_on_distance() const
{
    return dims > 1 && param == parameterization::distance_free;
}

namespace
{

// Offset of the feature cell inside the NLOS joint histogram (bias on axis 0), nullopt if outside.
std::optional<std::size_t> nlos_feature_offset(const histogram_grid &h, std::span<const double> x)
{
    if (x.size() + 1 != h.dims())
        throw domain_error("feature dimension does not match the density model");
    std::size_t off = 0;
    for (std::size_t k = 1; k < h.dims(); ++k)
    {
        const auto i = h.axis(k).locate(x[k - 1]);
        if (!i)
            return std::nullopt;
        off = off * h.axis(k).bins + *i;
    }
    return off;
}

void check_features(const density_model &m, std::span<const double> x)
{
    if (x.size() != m.n_features())
        throw domain_error("feature dimension " + std::to_string(x.size()) + " does not match a " +
                           std::to_string(m.dims) + "-D density model");
}

} // namespace

double density_model::los_feature_density(std::span<const double> x) const
{
    check_features(*this, x);
    if (kind == estimator_kind::fitted)
        return los_fit->feature_density(x);
    if (dims == 1)
        return 1.0;
    return los_hist.value_at(x);
}

double density_model::nlos_feature_density(std::span<const double> x) const
{
    check_features(*this, x);
    if (kind == estimator_kind::fitted)
        return nlos_fit->feature_density(x);
    const auto off = nlos_feature_offset(nlos_hist, x);
    if (!off)
        return 0.0;
    const std::size_t stride = nlos_hist.stride(0);
    double acc = 0.0;
    for (std::size_t j = 0; j < nlos_hist.axis(0).bins; ++j)
        acc += nlos_hist[j * stride + *off];
    return acc * nlos_hist.axis(0).width;
}

double density_model::los_kernel(double u, std::span<const double> x, double sigma) const
{
    if (!(sigma > 0.0))
        throw domain_error("likelihood needs sigma > 0");
    const double f = los_feature_density(x);
    return f == 0.0 ? 0.0 : normal_pdf(u / sigma) / sigma * f;
}

double density_model::nlos_kernel(double u, std::span<const double> x, double sigma) const
{
    check_features(*this, x);
    if (kind == estimator_kind::fitted)
        return nlos_fit->convolved(u, x, sigma);
    const auto off = nlos_feature_offset(nlos_hist, x);
    if (!off)
        return 0.0;
    return convolve_bias_axis(nlos_hist.axis(0), std::span<const double>(nlos_hist.density()).subspan(*off),
                              nlos_hist.stride(0), u, sigma);
}

double density_model::likelihood(double u, std::span<const double> x, double sigma) const
{
    double v = 0.0;
    if (p_los > 0.0)
        v += p_los * los_kernel(u, x, sigma);
    if (p_los < 1.0)
        v += (1.0 - p_los) * nlos_kernel(u, x, sigma);
    return std::max(v, floor_density);
}

double density_model::nlos_conditional_mean(std::span<const double> x) const
{
    check_features(*this, x);
    if (kind == estimator_kind::fitted)
        return nlos_fit->conditional_mean_bias(x);
    const auto off = nlos_feature_offset(nlos_hist, x);
    if (!off)
        return std::numeric_limits<double>::quiet_NaN();
    const auto &ax = nlos_hist.axis(0);
    const std::size_t stride = nlos_hist.stride(0);
    double mass = 0.0, first = 0.0;
    for (std::size_t j = 0; j < ax.bins; ++j)
    {
        const double f = nlos_hist[j * stride + *off];
        mass += f;
        first += f * ax.center(j);
    }
    return mass > 0.0 ? first / mass : std::numeric_limits<double>::quiet_NaN();
}

double density_model::nlos_bias_density(double b, std::span<const double> x) const
{
    const double fx = nlos_feature_density(x);
    if (!(fx > 0.0))
        return 0.0;
    if (kind == estimator_kind::fitted)
        return nlos_fit->joint_density(b, x) / fx;
    const auto off = nlos_feature_offset(nlos_hist, x);
    const auto j = nlos_hist.axis(0).locate(b);
    if (!off || !j)
        return 0.0;
    return nlos_hist[*j * nlos_hist.stride(0) + *off] / fx;
}

double density_model::nlos_bias_mean() const
{
    if (kind == estimator_kind::fitted)
        return nlos_fit->bias_shift + 1.0 / nlos_fit->bias_rate;
    const auto &ax = nlos_hist.axis(0);
    const std::size_t stride = nlos_hist.stride(0);
    double mass = 0.0, first = 0.0;
    for (std::size_t j = 0; j < ax.bins; ++j)
    {
        const double f = std::accumulate(nlos_hist.density().begin() + static_cast<std::ptrdiff_t>(j * stride),
                                         nlos_hist.density().begin() + static_cast<std::ptrdiff_t>((j + 1) * stride),
                                         0.0);
        mass += f;
        first += f * ax.center(j);
    }
    return first / mass;
}

density_model density_model::bias_marginal() const
{
    density_model m = *this;
    m.dims = 1;
    if (kind == estimator_kind::fitted)
    {
        for (auto *f : {&m.los_fit, &m.nlos_fit})
        {
            auto &d = **f;
            d.scale.resize(0);
            d.mu0.resize(0);
            d.mu1.resize(0);
            d.cov.resize(0, 0);
            d.finalize();
        }
    }
    else
    {
        m.los_hist = histogram_grid();
        if (nlos_hist.dims() > 1)
        {
            std::vector<std::size_t> drop(nlos_hist.dims() - 1);
            std::iota(drop.begin(), drop.end(), 1);
            m.nlos_hist = marginalize(nlos_hist, drop);
        }
    }
    return m;
}

density_model density_model::with_p_los(double p) const
{
    if (!(p >= 0.0 && p <= 1.0))
        throw domain_error("p_los must lie in [0, 1]");
    density_model m = *this;
    m.p_los = p;
    return m;
}

void density_model::validate() const
{
    if (dims != 1 && dims != 2 && dims != 4)
        throw domain_error("density models support dims 1, 2 or 4");
    if (!(p_los >= 0.0 && p_los <= 1.0))
        throw domain_error("p_los must lie in [0, 1]");
    if (!(floor_density > 0.0))
        throw domain_error("floor density must be positive");
    if (kind == estimator_kind::fitted)
    {
        if (!los_fit || !nlos_fit)
            throw domain_error("fitted model lacks a component");
        if (los_fit->n_features() != n_features() || nlos_fit->n_features() != n_features())
            throw domain_error("fitted component dimension mismatch");
        return;
    }
    if (nlos_hist.dims() != dims)
        throw domain_error("NLOS histogram dimension mismatch");
    if (nlos_hist.axis(0).lower < bias_floor * (1.0 - 1e-12))
        throw domain_error("NLOS histogram places mass below the wall delay");
    if (dims > 1 && los_hist.dims() != dims - 1)
        throw domain_error("LOS histogram dimension mismatch");
}

density_model build_density_model(std::span<const training_sample> samples, const density_options &opt)
{
    if (opt.dims != 1 && opt.dims != 2 && opt.dims != 4)
        throw domain_error("density models support dims 1, 2 or 4");
    if (!(opt.p_los >= 0.0 && opt.p_los <= 1.0))
        throw domain_error("p_los must lie in [0, 1]");

    density_model m;
    m.kind = opt.kind;
    m.param = opt.param;
    m.dims = opt.dims;
    m.p_los = opt.p_los;
    m.bias_floor = opt.wall_thickness / speed_of_light;
    m.floor_density = opt.floor_density;

    if (opt.param == parameterization::distance_free && opt.dims > 1)
    {
        std::vector<feature_vector> xs;
        std::vector<double> ds;
        for (const auto &s : samples)
        {
            xs.push_back(s.x);
            ds.push_back(s.d);
        }
        m.feature_params = fit_feature_models(xs, ds).params;
    }

    std::vector<std::vector<double>> los_x, nlos_x;
    std::vector<double> los_b, nlos_b;
    for (const auto &s : samples)
    {
        auto x = m.model_features(s.x, s.d);
        if (s.state == channel_state::los)
        {
            los_x.push_back(std::move(x));
            los_b.push_back(s.b);
        }
        else
        {
            nlos_x.push_back(std::move(x));
            nlos_b.push_back(s.b);
        }
    }
    if (los_x.empty() || nlos_x.empty())
        throw domain_error("density model needs both LOS and NLOS training samples");

    if (opt.kind == estimator_kind::fitted)
    {
        m.los_fit = fit_analytic(channel_state::los, los_b, los_x, m.bias_floor);
        m.nlos_fit = fit_analytic(channel_state::nlos, nlos_b, nlos_x, m.bias_floor);
        m.validate();
        return m;
    }

    const std::size_t def = opt.dims == 4 ? 12 : 25;
    const std::size_t bias_bins = opt.bias_bins ? opt.bias_bins : def;
    const std::size_t feat_bins = opt.feature_bins ? opt.feature_bins : def;
    const std::size_t k = opt.dims - 1;

    auto feature_axes = [&](const std::vector<std::vector<double>> &xs) {
        std::vector<histogram_axis> axes;
        std::vector<double> col(xs.size());
        for (std::size_t j = 0; j < k; ++j)
        {
            for (std::size_t i = 0; i < xs.size(); ++i)
                col[i] = xs[i][j];
            axes.push_back(axis_covering(col, feat_bins));
        }
        return axes;
    };

    if (k > 0)
        m.los_hist = build_histogram(los_x, feature_axes(los_x));

    // The bias axis starts exactly at the wall delay so no mass enters the null region.
    const double b_hi = *std::max_element(nlos_b.begin(), nlos_b.end());
    const double span = b_hi - m.bias_floor;
    std::vector<histogram_axis> axes{{m.bias_floor, span > 0.0 ? span / static_cast<double>(bias_bins) : 1e-12,
                                      bias_bins}};
    for (const auto &a : feature_axes(nlos_x))
        axes.push_back(a);
    std::vector<std::vector<double>> joint(nlos_x.size());
    for (std::size_t i = 0; i < nlos_x.size(); ++i)
    {
        joint[i].push_back(nlos_b[i]);
        joint[i].insert(joint[i].end(), nlos_x[i].begin(), nlos_x[i].end());
    }
    m.nlos_hist = build_histogram(joint, axes);

    if (opt.kind == estimator_kind::interpolated)
    {
        if (k > 0)
            m.los_hist = interpolate_smooth(m.los_hist, opt.smoothing);
        m.nlos_hist = interpolate_smooth(m.nlos_hist, opt.smoothing);
    }
    m.validate();
    return m;
}

// ---- Model file ----------------------------------------------------------------------------

namespace
{

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_histogram(std::ostream &out, const histogram_grid &h)
{
    out << "form = histogram\n";
    out << "axes = " << h.dims() << '\n';
    for (const auto &a : h.axes())
        out << "axis = " << fmt(a.lower) << ' ' << fmt(a.width) << ' ' << a.bins << '\n';
    out << "cells = " << h.cell_count() << '\n';
    char buf[40];
    for (double v : h.density())
    {
        std::snprintf(buf, sizeof buf, "%+.17e", v);
        out << buf << '\n';
    }
}

void write_vector(std::ostream &out, const char *key, const Eigen::VectorXd &v)
{
    out << key << " =";
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out << ' ' << fmt(v[i]);
    out << '\n';
}

void write_fitted(std::ostream &out, const fitted_density &f)
{
    out << "form = fitted\n";
    out << "n_features = " << f.n_features() << '\n';
    out << "bias_shift = " << fmt(f.bias_shift) << '\n';
    out << "bias_rate = " << fmt(f.bias_rate) << '\n';
    out << "heldout_loglik = " << fmt(f.heldout_loglik) << '\n';
    out << "heldout_count = " << f.heldout_count << '\n';
    out << "regularized = " << (f.regularized ? 1 : 0) << '\n';
    write_vector(out, "scale", f.scale);
    write_vector(out, "mu0", f.mu0);
    write_vector(out, "mu1", f.mu1);
    out << "cov =";
    for (Eigen::Index r = 0; r < f.cov.rows(); ++r)
        for (Eigen::Index c = 0; c < f.cov.cols(); ++c)
            out << ' ' << fmt(f.cov(r, c));
    out << '\n';
}

class line_reader
{
public:
    explicit line_reader(std::istream &in) : in_(in) {}

    std::string line()
    {
        std::string s;
        if (!std::getline(in_, s))
            fail("unexpected end of file");
        ++number_;
        return s;
    }

    std::string value(std::string_view key)
    {
        const auto s = line();
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            fail("expected '" + std::string(key) + " = ...'");
        auto k = s.substr(0, eq);
        k.erase(k.find_last_not_of(' ') + 1);
        if (k != key)
            fail("expected key '" + std::string(key) + "', found '" + k + "'");
        auto v = s.substr(eq + 1);
        v.erase(0, v.find_first_not_of(' '));
        return v;
    }

    double number(std::string_view key) { return to_double(value(key)); }

    std::size_t count(std::string_view key)
    {
        const auto v = value(key);
        std::size_t pos = 0;
        unsigned long long n = 0;
        try
        {
            n = std::stoull(v, &pos);
        }
        catch (const std::exception &)
        {
            fail("invalid count '" + v + "'");
        }
        if (pos != v.size())
            fail("invalid count '" + v + "'");
        return static_cast<std::size_t>(n);
    }

    std::vector<double> numbers(std::string_view key, std::size_t n)
    {
        std::istringstream ss(value(key));
        std::vector<double> out;
        std::string tok;
        while (ss >> tok)
            out.push_back(to_double(tok));
        if (out.size() != n)
            fail("expected " + std::to_string(n) + " values for '" + std::string(key) + "'");
        return out;
    }

    double to_double(const std::string &s)
    {
        std::size_t pos = 0;
        double v = 0.0;
        try
        {
            v = std::stod(s, &pos);
        }
        catch (const std::exception &)
        {
            fail("invalid number '" + s + "'");
        }
        if (pos != s.size())
            fail("invalid number '" + s + "'");
        return v;
    }

    [[noreturn]] void fail(const std::string &msg) const
    {
        throw config_error("density model line " + std::to_string(number_) + ": " + msg);
    }

private:
    std::istream &in_;
    std::size_t number_ = 0;
};

histogram_grid read_histogram(line_reader &rd)
{
    const std::size_t n_axes = rd.count("axes");
    std::vector<histogram_axis> axes;
    std::size_t cells = 1;
    for (std::size_t a = 0; a < n_axes; ++a)
    {
        const auto v = rd.numbers("axis", 3);
        if (!(v[1] > 0.0) || !(v[2] >= 1.0) || v[2] != std::floor(v[2]))
            rd.fail("invalid axis line");
        axes.push_back({v[0], v[1], static_cast<std::size_t>(v[2])});
        cells *= axes.back().bins;
    }
    if (rd.count("cells") != cells)
        rd.fail("cell count does not match the axes");
    std::vector<double> d(cells);
    for (auto &v : d)
    {
        v = rd.to_double(rd.line());
        if (!(v >= 0.0))
            rd.fail("negative cell density");
    }
    return histogram_grid(std::move(axes), std::move(d));
}

fitted_density read_fitted(line_reader &rd, channel_state state)
{
    fitted_density f;
    f.state = state;
    const std::size_t k = rd.count("n_features");
    f.bias_shift = rd.number("bias_shift");
    f.bias_rate = rd.number("bias_rate");
    f.heldout_loglik = rd.number("heldout_loglik");
    f.heldout_count = rd.count("heldout_count");
    f.regularized = rd.count("regularized") != 0;
    auto vec = [&](const char *key) {
        const auto v = rd.numbers(key, k);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(k)));
    };
    f.scale = vec("scale");
    f.mu0 = vec("mu0");
    f.mu1 = vec("mu1");
    const auto c = rd.numbers("cov", k * k);
    f.cov.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t q = 0; q < k; ++q)
            f.cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = c[r * k + q];
    try
    {
        f.finalize();
    }
    catch (const domain_error &e)
    {
        rd.fail(e.what());
    }
    return f;
}

} // namespace

void write_density_model(std::ostream &out, const density_model &m)
{
    m.validate();
    out << density_magic << '\n';
    out << "version = " << density_format_version << '\n';
    out << "estimator = " << to_string(m.kind) << '\n';
    out << "dims = " << m.dims << '\n';
    out << "parameterization = " << to_string(m.param) << '\n';
    out << "p_los = " << fmt(m.p_los) << '\n';
    out << "bias_floor = " << fmt(m.bias_floor) << '\n';
    out << "floor_density = " << fmt(m.floor_density) << '\n';
    out << "r_max_slope = " << fmt(m.feature_params.r_max_slope) << '\n';
    out << "tau_ds_offset = " << fmt(m.feature_params.tau_ds_offset) << '\n';

    out << "component = los\n";
    if (m.kind == estimator_kind::fitted)
        write_fitted(out, *m.los_fit);
    else if (m.dims == 1)
        out << "form = point_mass\n";
    else
        write_histogram(out, m.los_hist);

    out << "component = nlos\n";
    if (m.kind == estimator_kind::fitted)
        write_fitted(out, *m.nlos_fit);
    else
        write_histogram(out, m.nlos_hist);
    out << "end\n";
}

density_model read_density_model(std::istream &in)
{
    line_reader rd(in);
    if (rd.line() != density_magic)
        rd.fail("not a density model file (bad magic)");
    const auto version = rd.count("version");
    if (version != static_cast<std::size_t>(density_format_version))
        rd.fail("unsupported density model version " + std::to_string(version));

    density_model m;
    try
    {
        m.kind = parse_estimator_kind(rd.value("estimator"));
        m.dims = rd.count("dims");
        m.param = parse_parameterization(rd.value("parameterization"));
    }
    catch (const config_error &e)
    {
        rd.fail(e.what());
    }
    m.p_los = rd.number("p_los");
    m.bias_floor = rd.number("bias_floor");
    m.floor_density = rd.number("floor_density");
    m.feature_params.r_max_slope = rd.number("r_max_slope");
    m.feature_params.tau_ds_offset = rd.number("tau_ds_offset");

    for (const auto state : {channel_state::los, channel_state::nlos})
    {
        const std::string expect(state == channel_state::los ? "los" : "nlos");
        if (rd.value("component") != expect)
            rd.fail("expected component " + expect);
        const auto form = rd.value("form");
        if (form == "fitted" && m.kind == estimator_kind::fitted)
            (state == channel_state::los ? m.los_fit : m.nlos_fit) = read_fitted(rd, state);
        else if (form == "histogram" && m.kind != estimator_kind::fitted)
            (state == channel_state::los ? m.los_hist : m.nlos_hist) = read_histogram(rd);
        else if (!(form == "point_mass" && state == channel_state::los && m.kind != estimator_kind::fitted))
            rd.fail("component form '" + form + "' does not fit estimator " + std::string(to_string(m.kind)));
    }
    if (rd.line() != "end")
        rd.fail("expected 'end'");
    try
    {
        m.validate();
    }
    catch (const domain_error &e)
    {
        rd.fail(e.what());
    }
    return m;
}

void save_density_model(const std::filesystem::path &path, const density_model &m)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_density_model(out, m);
    if (!out)
        throw std::runtime_error("write to " + path.string() + " failed");
}

density_model load_density_model(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    return read_density_model(in);
}

} // namespace uwbnlos
