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

#include "uwbnlos/fitted_density.hpp"

#include "uwbnlos/common.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace uwbnlos
{

namespace
{

constexpr double log_2pi = 1.8378770664093454836;

// log of the integral of exp(-p b^2 / 2 + q b) over [b0, inf).
double log_truncated_gauss_integral(double p, double q, double b0)
{
    if (p <= 0.0)
    {
        if (!(q < 0.0))
            throw domain_error("divergent bias integral");
        return q * b0 - std::log(-q);
    }
    const double sp = std::sqrt(p);
    const double m = q / p;
    return 0.5 * q * m + 0.5 * (log_2pi - std::log(p)) + log_normal_tail((b0 - m) * sp);
}

double mean_of_truncated_gauss(double p, double q, double b0)
{
    if (p <= 0.0)
    {
        if (!(q < 0.0))
            throw domain_error("divergent bias integral");
        return b0 - 1.0 / q;
    }
    const double s = 1.0 / std::sqrt(p);
    const double m = q / p;
    const double alpha = (b0 - m) / s;
    const double hazard = std::exp(-0.5 * alpha * alpha - 0.5 * log_2pi - log_normal_tail(alpha));
    return m + s * hazard;
}

struct core_fit
{
    double rate = 0.0;
    Eigen::VectorXd mu0, mu1;
    Eigen::MatrixXd cov;
    bool regularized = false;
};

core_fit fit_core(channel_state state, std::span<const double> b, const std::vector<Eigen::VectorXd> &z,
                  const std::vector<std::size_t> &idx, double b0)
{
    const auto k = z.front().size();
    const double n = static_cast<double>(idx.size());
    core_fit f;

    double mean_b = 0.0;
    Eigen::VectorXd mean_z = Eigen::VectorXd::Zero(k);
    for (auto i : idx)
    {
        mean_b += b[i];
        mean_z += z[i];
    }
    mean_b /= n;
    mean_z /= n;

    f.mu1 = Eigen::VectorXd::Zero(k);
    if (state == channel_state::nlos)
    {
        const double excess = mean_b - b0;
        if (!(excess > 0.0))
            throw domain_error("NLOS biases show no excess over the wall delay");
        f.rate = 1.0 / excess;

        double sbb = 0.0;
        Eigen::VectorXd sbz = Eigen::VectorXd::Zero(k);
        for (auto i : idx)
        {
            const double db = b[i] - mean_b;
            sbb += db * db;
            sbz += db * (z[i] - mean_z);
        }
        if (sbb > 0.0)
            f.mu1 = sbz / sbb;
    }
    f.mu0 = mean_z - f.mu1 * mean_b;

    f.cov = Eigen::MatrixXd::Zero(k, k);
    for (auto i : idx)
    {
        const Eigen::VectorXd r = z[i] - f.mu0 - f.mu1 * b[i];
        f.cov += r * r.transpose();
    }
    f.cov /= n;

    // Diagonal loading on the correlation matrix when the covariance is (near) singular.
    Eigen::VectorXd d = f.cov.diagonal();
    for (Eigen::Index j = 0; j < k; ++j)
    {
        if (!(d[j] > 1e-24))
        {
            d[j] = 1e-12;
            f.regularized = true;
        }
    }
    const Eigen::VectorXd s = d.cwiseSqrt();
    Eigen::MatrixXd corr = s.cwiseInverse().asDiagonal() * f.cov * s.cwiseInverse().asDiagonal();
    corr.diagonal().setOnes();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < 1e-10 * eig.eigenvalues().maxCoeff())
    {
        corr.diagonal().array() += 1e-6;
        f.regularized = true;
    }
    f.cov = s.asDiagonal() * corr * s.asDiagonal();
    return f;
}

fitted_density assemble(channel_state state, double b0, const Eigen::VectorXd &scale, const core_fit &c)
{
    fitted_density d;
    d.state = state;
    d.bias_shift = state == channel_state::nlos ? b0 : 0.0;
    d.bias_rate = c.rate;
    d.scale = scale;
    d.mu0 = c.mu0;
    d.mu1 = c.mu1;
    d.cov = c.cov;
    d.regularized = c.regularized;
    d.finalize();
    return d;
}

} // namespace

void fitted_density::finalize()
{
    const auto k = mu0.size();
    if (scale.size() != k || mu1.size() != k || cov.rows() != k || cov.cols() != k)
        throw domain_error("fitted density parameters have inconsistent dimensions");
    if (state == channel_state::nlos && !(bias_rate > 0.0))
        throw domain_error("NLOS fitted density needs a positive bias rate");
    log_norm_ = 0.0;
    a_ = 0.0;
    cinv_mu1_ = Eigen::VectorXd::Zero(k);
    if (k == 0)
        return;
    llt_.compute(cov);
    if (llt_.info() != Eigen::Success)
        throw domain_error("fitted covariance is not positive definite");
    const Eigen::MatrixXd l = llt_.matrixL();
    double log_det = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
        log_det += 2.0 * std::log(l(j, j));
    log_norm_ = -0.5 * (static_cast<double>(k) * log_2pi + log_det) - scale.array().log().sum();
    cinv_mu1_ = llt_.solve(mu1);
    a_ = mu1.dot(cinv_mu1_);
}

fitted_density::gaussian_terms fitted_density::terms(std::span<const double> x) const
{
    const auto k = mu0.size();
    if (static_cast<Eigen::Index>(x.size()) != k)
        throw domain_error("feature dimension does not match the fitted density");
    if (k == 0)
        return {0.0, 0.0, 0.0};
    Eigen::VectorXd r(k);
    for (Eigen::Index j = 0; j < k; ++j)
        r[j] = x[static_cast<std::size_t>(j)] / scale[j] - mu0[j];
    const double quad = r.dot(llt_.solve(r));
    return {log_norm_ - 0.5 * quad, a_, cinv_mu1_.dot(r)};
}

double fitted_density::joint_density(double b, std::span<const double> x) const
{
    const auto t = terms(x);
    if (state == channel_state::los)
        return std::exp(t.log_base);
    if (b < bias_shift)
        return 0.0;
    return bias_rate * std::exp(-bias_rate * (b - bias_shift) + t.log_base + b * t.b - 0.5 * t.a * b * b);
}

double fitted_density::feature_density(std::span<const double> x) const
{
    const auto t = terms(x);
    if (state == channel_state::los)
        return std::exp(t.log_base);
    const double log_i = log_truncated_gauss_integral(t.a, t.b - bias_rate, bias_shift);
    return std::exp(std::log(bias_rate) + bias_rate * bias_shift + t.log_base + log_i);
}

double fitted_density::convolved(double u, std::span<const double> x, double sigma) const
{
    if (!(sigma > 0.0))
        throw domain_error("convolution needs sigma > 0");
    const auto t = terms(x);
    const double inv_var = 1.0 / (sigma * sigma);
    if (state == channel_state::los)
        return normal_pdf(u / sigma) / sigma * std::exp(t.log_base);
    const double log_i = log_truncated_gauss_integral(t.a + inv_var, t.b - bias_rate + u * inv_var, bias_shift);
    return std::exp(std::log(bias_rate) + bias_rate * bias_shift + t.log_base - 0.5 * (log_2pi + 2.0 * std::log(sigma)) -
                    0.5 * u * u * inv_var + log_i);
}

double fitted_density::conditional_mean_bias(std::span<const double> x) const
{
    if (state == channel_state::los)
        return 0.0;
    const auto t = terms(x);
    return mean_of_truncated_gauss(t.a, t.b - bias_rate, bias_shift);
}

fitted_density fit_analytic(channel_state state, std::span<const double> biases,
                            std::span<const std::vector<double>> features, double bias_shift)
{
    const std::size_t n = biases.size();
    if (features.size() != n)
        throw domain_error("bias and feature lists differ in length");
    if (n < 10)
        throw domain_error("fitting needs at least 10 samples");
    const std::size_t k = features.front().size();

    for (std::size_t i = 0; i < n; ++i)
    {
        if (features[i].size() != k)
            throw domain_error("feature vectors have inconsistent dimension");
        if (state == channel_state::los && biases[i] != 0.0)
            throw domain_error("LOS samples must have zero bias");
        if (state == channel_state::nlos && biases[i] < bias_shift)
            throw domain_error("NLOS sample below the wall delay");
    }

    Eigen::VectorXd scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j)
    {
        double m = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            m += features[i][j];
        m /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            m2 += (features[i][j] - m) * (features[i][j] - m);
        const double sd = std::sqrt(m2 / static_cast<double>(n));
        scale[static_cast<Eigen::Index>(j)] = sd > 0.0 ? sd : (m != 0.0 ? std::abs(m) : 1.0);
    }

    std::vector<Eigen::VectorXd> z(n, Eigen::VectorXd(static_cast<Eigen::Index>(k)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
            z[i][static_cast<Eigen::Index>(j)] = features[i][j] / scale[static_cast<Eigen::Index>(j)];

    std::vector<std::size_t> train, test, all(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        all[i] = i;
        (i % 5 == 4 ? test : train).push_back(i);
    }

    const auto held = assemble(state, bias_shift, scale, fit_core(state, biases, z, train, bias_shift));
    double ll = 0.0;
    for (auto i : test)
        ll += std::log(held.joint_density(biases[i], features[i]));

    auto out = assemble(state, bias_shift, scale, fit_core(state, biases, z, all, bias_shift));
    out.heldout_count = test.size();
    out.heldout_loglik = ll / static_cast<double>(test.size());
    if (out.regularized || held.regularized)
    {
        out.regularized = true;
        out.warning = "singular feature covariance; diagonal loading applied";
    }
    return out;
}

} // namespace uwbnlos
