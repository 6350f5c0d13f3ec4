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

#include "uwbnlos/experiment_harness.hpp"

#include "uwbnlos/config_file.hpp"
#include "uwbnlos/feature_extract.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace uwbnlos
{

vec2 place_anchor(std::size_t i, std::size_t n_anchors, double d)
{
    if (n_anchors == 0 || i < 1 || i > n_anchors)
        throw domain_error("anchor index must satisfy 1 <= i <= n_anchors");
    if (!(d > 0.0))
        throw domain_error("anchor distance must be positive");
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(i - 1) / static_cast<double>(n_anchors);
    return {d * std::sin(phi), d * std::cos(phi)};
}

void experiment_config::validate() const
{
    if (n_anchors < 3)
        throw config_error("n_anchors must be at least 3");
    if (p_los_values.empty())
        throw config_error("p_los sweep is empty");
    for (double p : p_los_values)
        if (!(p >= 0.0 && p <= 1.0))
            throw config_error("p_los values must lie in [0, 1]");
    if (trials == 0)
        throw config_error("trials must be at least 1");
    if (algorithms.empty())
        throw config_error("no algorithms selected");
    if (!(grid_step > 0.0) || !(grid_half_extent > 0.0))
        throw config_error("grid step and half extent must be positive");
    if (threads == 0)
        throw config_error("threads must be at least 1");
    noise.validate();
}

experiment_config experiment_config_from(const key_value_file &kv, const std::filesystem::path &base_dir)
{
    kv.require_known({"n_anchors", "p_los", "trials", "seed", "algorithms", "corpus", "los_corpus", "nlos_corpus",
                      "model_ls", "model_ve", "model_ml4d", "model_ml2d", "model_ml2did", "model_ml4df", "model_ml4dit",
                      "model_ml2dit", "grid_step", "grid_half_extent", "gamma", "sigma_n2", "beta", "threads",
                      "bias_bins", "feature_bins", "upsample", "taps", "passes", "floor_density", "profile_spacing",
                      "tabulate", "max_iters", "tol"});
    experiment_config c;
    auto path = [&](std::string_view key) -> std::optional<std::filesystem::path> {
        const auto v = kv.get(key);
        if (!v)
            return std::nullopt;
        std::filesystem::path p(*v);
        return p.is_absolute() ? p : base_dir / p;
    };

    c.n_anchors = kv.get_uint("n_anchors", c.n_anchors);
    c.p_los_values = kv.get_list("p_los", c.p_los_values);
    c.trials = kv.get_uint("trials", c.trials);
    c.seed = kv.get_uint("seed", c.seed);
    if (const auto a = kv.get("algorithms"))
    {
        c.algorithms.clear();
        std::stringstream ss(*a);
        std::string tok;
        while (std::getline(ss, tok, ','))
        {
            tok.erase(0, tok.find_first_not_of(' '));
            tok.erase(tok.find_last_not_of(' ') + 1);
            if (!tok.empty())
                c.algorithms.push_back(parse_algorithm(tok));
        }
    }
    c.corpus = path("corpus");
    c.los_corpus = path("los_corpus");
    c.nlos_corpus = path("nlos_corpus");
    for (auto a : all_algorithms)
        if (auto p = path("model_" + std::string(to_string(a))))
            c.model_paths[a] = *p;
    c.grid_step = kv.get_double("grid_step", c.grid_step);
    c.grid_half_extent = kv.get_double("grid_half_extent", c.grid_half_extent);
    c.noise = noise_model_from(kv);
    c.threads = kv.get_uint("threads", c.threads);
    c.density.bias_bins = kv.get_uint("bias_bins", c.density.bias_bins);
    c.density.feature_bins = kv.get_uint("feature_bins", c.density.feature_bins);
    c.density.smoothing.upsample = kv.get_uint("upsample", c.density.smoothing.upsample);
    c.density.smoothing.taps = kv.get_uint("taps", c.density.smoothing.taps);
    c.density.smoothing.passes = kv.get_uint("passes", c.density.smoothing.passes);
    c.density.floor_density = kv.get_double("floor_density", c.density.floor_density);
    c.ml.profile_spacing_fraction = kv.get_double("profile_spacing", c.ml.profile_spacing_fraction);
    c.ml.tabulate = kv.get_uint("tabulate", 1) != 0;
    c.iteration.max_iters = kv.get_uint("max_iters", c.iteration.max_iters);
    c.iteration.tol = kv.get_double("tol", c.iteration.tol);
    if (!c.corpus && !(c.los_corpus && c.nlos_corpus))
        throw config_error("experiment needs 'corpus' or both 'los_corpus' and 'nlos_corpus'");
    c.validate();
    return c;
}

// ---- Aggregation ----------------------------------------------------------------------------

std::vector<sweep_row> summarize(std::span<const trial_result> results)
{
    struct acc
    {
        algorithm algo;
        double p;
        std::vector<double> e2;
    };
    std::vector<acc> groups;
    for (const auto &r : results)
    {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const acc &g) { return g.algo == r.algo && g.p == r.p_los; });
        if (it == groups.end())
        {
            groups.push_back({r.algo, r.p_los, {}});
            it = groups.end() - 1;
        }
        it->e2.push_back(r.sq_error);
    }

    std::vector<sweep_row> out;
    for (const auto &g : groups)
    {
        const auto n = static_cast<double>(g.e2.size());
        double mse = 0.0;
        for (double v : g.e2)
            mse += v;
        mse /= n;
        double var = 0.0;
        for (double v : g.e2)
            var += (v - mse) * (v - mse);
        var = g.e2.size() > 1 ? var / (n - 1.0) : 0.0;
        sweep_row row;
        row.algo = g.algo;
        row.p_los = g.p;
        row.trials = g.e2.size();
        row.rmse = std::sqrt(mse);
        row.rmse_stderr = row.rmse > 0.0 ? std::sqrt(var / n) / (2.0 * row.rmse) : 0.0;
        out.push_back(row);
    }
    return out;
}

namespace
{

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void write_results_csv(std::ostream &out, std::span<const sweep_row> rows)
{
    out << "algorithm,p_los,trials,rmse_m,rmse_stderr_m\n";
    for (const auto &r : rows)
        out << to_string(r.algo) << ',' << num(r.p_los) << ',' << r.trials << ',' << num(r.rmse) << ','
            << num(r.rmse_stderr) << '\n';
}

void write_plot_data(std::ostream &out, std::span<const sweep_row> rows)
{
    std::vector<algorithm> algos;
    std::vector<double> ps;
    for (const auto &r : rows)
    {
        if (std::find(algos.begin(), algos.end(), r.algo) == algos.end())
            algos.push_back(r.algo);
        if (std::find(ps.begin(), ps.end(), r.p_los) == ps.end())
            ps.push_back(r.p_los);
    }
    out << "p_los";
    for (auto a : algos)
        out << '\t' << display_name(a);
    out << '\n';
    for (double p : ps)
    {
        out << num(p);
        for (auto a : algos)
        {
            const auto it = std::find_if(rows.begin(), rows.end(), [&](const sweep_row &r) { return r.algo == a && r.p_los == p; });
            out << '\t' << (it == rows.end() ? std::string("nan") : num(it->rmse));
        }
        out << '\n';
    }
}

void write_trials_csv(std::ostream &out, std::span<const trial_result> results)
{
    out << "algorithm,p_los,trial,theta_x,theta_y,sq_error_m2,degenerate\n";
    for (const auto &r : results)
        out << to_string(r.algo) << ',' << num(r.p_los) << ',' << r.trial << ',' << num(r.theta.x) << ','
            << num(r.theta.y) << ',' << num(r.sq_error) << ',' << (r.degenerate ? 1 : 0) << '\n';
}

// ---- Experiment -----------------------------------------------------------------------------

experiment::experiment(experiment_config cfg) : cfg_(std::move(cfg))
{
    cfg_.validate();
    std::vector<waveform_record> records;
    auto append = [&](const std::filesystem::path &p) {
        auto c = load_corpus(p);
        cfg_.density.wall_thickness = c.config.wall_thickness;
        records.insert(records.end(), std::make_move_iterator(c.records.begin()),
                       std::make_move_iterator(c.records.end()));
    };
    if (cfg_.corpus)
        append(*cfg_.corpus);
    else
    {
        if (!cfg_.los_corpus || !cfg_.nlos_corpus)
            throw config_error("experiment needs a corpus");
        append(*cfg_.los_corpus);
        append(*cfg_.nlos_corpus);
    }
    prepare(std::move(records));
}

experiment::experiment(experiment_config cfg, std::vector<waveform_record> records) : cfg_(std::move(cfg))
{
    cfg_.validate();
    prepare(std::move(records));
}

void experiment::prepare(std::vector<waveform_record> records)
{
    records_ = std::move(records);
    features_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i)
    {
        features_.push_back(extract_all(records_[i]));
        (records_[i].state == channel_state::los ? los_pool_ : nlos_pool_).push_back(i);
    }
    for (double p : cfg_.p_los_values)
    {
        if (p > 0.0 && los_pool_.empty())
            throw config_error("p_los > 0 requested but the corpus has no LOS records");
        if (p < 1.0 && nlos_pool_.empty())
            throw config_error("p_los < 1 requested but the corpus has no NLOS records");
    }

    std::vector<training_sample> training;
    for (std::size_t i = 0; i < records_.size(); ++i)
        training.push_back({records_[i].state, records_[i].true_distance, records_[i].true_bias, features_[i]});

    std::map<std::filesystem::path, std::size_t> by_path;
    std::vector<std::pair<model_requirement, std::size_t>> built;
    for (auto a : cfg_.algorithms)
    {
        const auto req = required_model(a);
        if (!req.needed)
            continue;
        if (const auto it = cfg_.model_paths.find(a); it != cfg_.model_paths.end())
        {
            auto [pos, fresh] = by_path.try_emplace(it->second, models_.size());
            if (fresh)
                models_.push_back(load_density_model(it->second));
            model_index_[a] = pos->second;
            continue;
        }
        const auto same = std::find_if(built.begin(), built.end(), [&](const auto &r) {
            return r.first.kind == req.kind && r.first.dims == req.dims && r.first.param == req.param;
        });
        if (same != built.end())
        {
            model_index_[a] = same->second;
            continue;
        }
        if (los_pool_.empty() || nlos_pool_.empty())
            throw config_error("training a density model needs both LOS and NLOS records");
        auto opt = cfg_.density;
        opt.kind = req.kind;
        opt.dims = req.dims;
        opt.param = req.param;
        models_.push_back(build_density_model(training, opt));
        built.emplace_back(req, models_.size() - 1);
        model_index_[a] = models_.size() - 1;
    }
}

const density_model &experiment::model_for(algorithm a) const
{
    const auto it = model_index_.find(a);
    if (it == model_index_.end())
        throw domain_error("no density model for algorithm " + std::string(to_string(a)));
    return models_[it->second];
}

scenario experiment::draw_scenario(double p_los, rng_stream &rng) const
{
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    scenario s;
    s.noise = cfg_.noise;
    for (std::size_t i = 1; i <= cfg_.n_anchors; ++i)
    {
        const bool los = coin(rng) < p_los;
        const auto &pool = los ? los_pool_ : nlos_pool_;
        if (pool.empty())
            throw config_error(std::string("no ") + (los ? "LOS" : "NLOS") + " records to draw from");
        const std::size_t idx = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        const auto &rec = records_[idx];

        ranging_observation o;
        o.anchor = place_anchor(i, cfg_.n_anchors, rec.true_distance);
        o.tau = simulate_toa(rec, cfg_.noise, rng);
        o.features = features_[idx];
        o.truth = link_truth{rec.true_distance, rec.true_bias, rec.state};
        s.links.push_back(o);
    }
    return s;
}

std::vector<density_model> experiment::models_at(double p_los) const
{
    std::vector<density_model> out;
    out.reserve(models_.size());
    for (const auto &m : models_)
        out.push_back(m.with_p_los(p_los));
    return out;
}

std::vector<trial_result> experiment::run_trial_with(const std::vector<density_model> &models, double p_los,
                                                     std::size_t trial, rng_stream &rng) const
{
    const auto s = draw_scenario(p_los, rng);
    const auto anchors = s.anchors();
    const auto grid = default_grid(anchors, cfg_.grid_step, cfg_.grid_half_extent);
    const vec2 truth{0.0, 0.0};

    std::vector<trial_result> out;
    for (auto a : cfg_.algorithms)
    {
        position_estimate e;
        bool degenerate = false;
        switch (a)
        {
        case algorithm::ls:
            e = ls_localize(s, grid);
            break;
        case algorithm::ve:
            e = ve_localize(s, models[model_index_.at(a)], grid, cfg_.iteration);
            break;
        case algorithm::ml4dit:
        case algorithm::ml2dit:
            e = ml_it_localize(s, models[model_index_.at(a)], grid, cfg_.iteration);
            break;
        default:
            try
            {
                e = ml_localize(s, models[model_index_.at(a)], grid, cfg_.ml);
            }
            catch (const degenerate_likelihood_error &)
            {
                // No vertex carries information; report the LS fix and flag the trial.
                e = ls_localize(s, grid);
                degenerate = true;
            }
            break;
        }
        trial_result r;
        r.algo = a;
        r.p_los = p_los;
        r.trial = trial;
        r.truth = truth;
        r.theta = e.theta;
        const vec2 err = e.theta - truth;
        r.sq_error = err.x * err.x + err.y * err.y;
        r.degenerate = degenerate;
        out.push_back(r);
    }
    return out;
}

std::vector<trial_result> experiment::run_trial(double p_los, std::size_t trial, rng_stream &rng) const
{
    return run_trial_with(models_at(p_los), p_los, trial, rng);
}

std::vector<trial_result> experiment::run_point(std::size_t point_index) const
{
    const double p = cfg_.p_los_values.at(point_index);
    const auto models = models_at(p);
    const std::size_t n = cfg_.trials;
    std::vector<std::vector<trial_result>> per_trial(n);

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t t = next++; t < n; t = next++)
        {
            try
            {
                auto rng = make_stream(cfg_.seed, (static_cast<std::uint64_t>(point_index) << 32) | t);
                per_trial[t] = run_trial_with(models, p, t, rng);
            }
            catch (...)
            {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = n;
            }
        }
    };
    const std::size_t workers = std::min(cfg_.threads, n);
    if (workers <= 1)
        worker();
    else
    {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(worker);
        for (auto &th : pool)
            th.join();
    }
    if (error)
        std::rethrow_exception(error);

    std::vector<trial_result> out;
    out.reserve(n * cfg_.algorithms.size());
    for (auto &v : per_trial)
        out.insert(out.end(), v.begin(), v.end());
    return out;
}

std::vector<trial_result> experiment::run_all() const
{
    std::vector<trial_result> out;
    for (std::size_t k = 0; k < cfg_.p_los_values.size(); ++k)
    {
        auto r = run_point(k);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

} // namespace uwbnlos
