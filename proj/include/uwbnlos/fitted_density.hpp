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

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace uwbnlos
{

/// Analytic joint density of (bias, features) for one channel state.
///
/// NLOS: b - b0 ~ Exp(rate) and x | b ~ N(mu0 + mu1 b, cov).
/// LOS:  b = 0 exactly and x ~ N(mu0, cov).
///
/// Features are stored standardized (z = x / scale) so the Gaussian algebra stays well conditioned
/// when the raw feature units differ by tens of orders of magnitude.
class fitted_density
{
public:
    channel_state state = channel_state::nlos;
    double bias_shift = 0.0; // b0, s
    double bias_rate = 0.0;  // 1/s, NLOS only
    Eigen::VectorXd scale;   // per-feature standardization
    Eigen::VectorXd mu0;     // standardized intercept
    Eigen::VectorXd mu1;     // standardized slope per second of bias, zero for LOS
    Eigen::MatrixXd cov;     // standardized covariance

    double heldout_loglik = 0.0; // mean log density over the held-out fifth
    std::size_t heldout_count = 0;
    bool regularized = false;
    std::string warning;

    std::size_t n_features() const { return static_cast<std::size_t>(mu0.size()); }

    /// Recomputes cached factorizations. Must be called after the public fields change.
    void finalize();

    /// NLOS: joint density in b and x. LOS: feature density (the bias is a point mass at zero).
    double joint_density(double b, std::span<const double> x) const;
    /// Bias marginalized out.
    double feature_density(std::span<const double> x) const;
    /// (f convolved with N(0, sigma^2) along b) evaluated at (u, x).
    double convolved(double u, std::span<const double> x, double sigma) const;
    /// E[b | x] under this component.
    double conditional_mean_bias(std::span<const double> x) const;

private:
    struct gaussian_terms
    {
        double log_base; // log N(x; mu0, cov) in standardized units, minus log prod(scale)
        double a;        // mu1' cov^-1 mu1
        double b;        // mu1' cov^-1 (z - mu0)
    };
    gaussian_terms terms(std::span<const double> x) const;

    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd cinv_mu1_;
    double log_norm_ = 0.0; // -0.5 log det(2 pi cov) - sum log scale
    double a_ = 0.0;
};

/// Fits the analytic family. biases and features must have equal lengths and at least ten entries.
/// The held-out score uses every fifth sample (indices 4, 9, ...) against a fit on the rest; the
/// returned parameters are then refitted on all samples.
fitted_density fit_analytic(channel_state state, std::span<const double> biases,
                            std::span<const std::vector<double>> features, double bias_shift);

} // namespace uwbnlos
