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
#include "uwbnlos/density_model.hpp"
#include "uwbnlos/localization.hpp"
#include "uwbnlos/ranging_model.hpp"
#include "uwbnlos/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace uwbnlos
{

class key_value_file;

/// z_i = (d sin(2 pi (i - 1) / n), d cos(2 pi (i - 1) / n)) for 1 <= i <= n.
vec2 place_anchor(std::size_t i, std::size_t n_anchors, double d);

struct experiment_config
{
    std::size_t n_anchors = 3;
    std::vector<double> p_los_values = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    std::vector<algorithm> algorithms = {all_algorithms.begin(), all_algorithms.end()};

    // Either one corpus holding both states or one file per state.
    std::optional<std::filesystem::path> corpus;
    std::optional<std::filesystem::path> los_corpus;
    std::optional<std::filesystem::path> nlos_corpus;
    // Prebuilt models by algorithm; missing entries are trained from the corpus.
    std::map<algorithm, std::filesystem::path> model_paths;

    double grid_step = 0.01;
    double grid_half_extent = 6.0;
    noise_model noise;
    density_options density; // kind/dims/param are set per algorithm
    ml_options ml;
    iteration_options iteration;
    std::size_t threads = 1;

    void validate() const;
};

/// Relative paths in the file are resolved against base_dir.
experiment_config experiment_config_from(const key_value_file &kv, const std::filesystem::path &base_dir = {});

struct trial_result
{
    algorithm algo = algorithm::ls;
    double p_los = 0.0;
    std::size_t trial = 0;
    vec2 truth;
    vec2 theta;
    double sq_error = 0.0;
    bool degenerate = false; // ML likelihood was at the floor everywhere; theta is the LS fix
};

struct sweep_row
{
    algorithm algo = algorithm::ls;
    double p_los = 0.0;
    std::size_t trials = 0;
    double rmse = 0.0;
    double rmse_stderr = 0.0;
};

/// Groups by (p_los, algorithm) in order of first appearance. The standard error of the RMSE is
/// the delta-method value se(MSE) / (2 RMSE).
std::vector<sweep_row> summarize(std::span<const trial_result> results);

void write_results_csv(std::ostream &out, std::span<const sweep_row> rows);
/// Tab-separated, one row per p_los, one column per algorithm.
void write_plot_data(std::ostream &out, std::span<const sweep_row> rows);
void write_trials_csv(std::ostream &out, std::span<const trial_result> results);

/// Loaded corpora, cached features and density models; immutable once constructed.
class experiment
{
public:
    /// Loads corpora and models named in the config, training missing models.
    explicit experiment(experiment_config cfg);
    /// Uses the given records (both states) and trains every model the algorithms need.
    experiment(experiment_config cfg, std::vector<waveform_record> records);

    const experiment_config &config() const { return cfg_; }
    const density_model &model_for(algorithm a) const;

    /// One Monte-Carlo draw: anchors, TOAs and features for the configured number of links.
    scenario draw_scenario(double p_los, rng_stream &rng) const;
    /// Every configured algorithm on one shared scenario, with every model's prior set to p_los.
    std::vector<trial_result> run_trial(double p_los, std::size_t trial, rng_stream &rng) const;
    /// Trial t of sweep point k uses make_stream(seed, (k << 32) | t).
    std::vector<trial_result> run_point(std::size_t point_index) const;
    std::vector<trial_result> run_all() const;

private:
    void prepare(std::vector<waveform_record> records);
    std::vector<density_model> models_at(double p_los) const;
    std::vector<trial_result> run_trial_with(const std::vector<density_model> &models, double p_los,
                                             std::size_t trial, rng_stream &rng) const;

    experiment_config cfg_;
    std::vector<waveform_record> records_;
    std::vector<feature_vector> features_;
    std::vector<std::size_t> los_pool_, nlos_pool_;
    // Distinct models, shared by algorithms with the same requirement.
    std::vector<density_model> models_;
    std::map<algorithm, std::size_t> model_index_;
};

} // namespace uwbnlos
