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

#include "uwbnlos/channel_corpus.hpp"
#include "uwbnlos/config_file.hpp"
#include "uwbnlos/csv_io.hpp"
#include "uwbnlos/density_model.hpp"
#include "uwbnlos/experiment_harness.hpp"
#include "uwbnlos/feature_extract.hpp"
#include "uwbnlos/localization.hpp"
#include "uwbnlos/ranging_model.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

using namespace uwbnlos;

namespace
{

std::ofstream open_out(const std::string &path)
{
    std::ofstream out(path);
    if (!out)
        throw config_error("cannot open " + path + " for writing");
    return out;
}

noise_model load_noise(const std::string &path)
{
    if (path.empty())
        return {};
    const auto kv = key_value_file::load(path);
    kv.require_known({"gamma", "sigma_n2", "beta"});
    return noise_model_from(kv);
}

int gen_corpus(const std::string &config_path, const std::string &out_path)
{
    corpus c;
    if (!config_path.empty())
        c.config = corpus_config_from(key_value_file::load(config_path));
    c.config.validate();
    c.records = generate_corpus(c.config);
    save_corpus(out_path, c);
    std::cout << "wrote " << c.records.size() << " records (" << c.config.n_los << " LOS, " << c.config.n_nlos
              << " NLOS) to " << out_path << '\n';
    return 0;
}

int extract(const std::string &corpus_path, const std::string &out_path, const std::string &params_path,
            bool fit_params)
{
    const auto c = load_corpus(corpus_path);
    std::vector<feature_row> rows;
    for (std::size_t i = 0; i < c.records.size(); ++i)
    {
        const auto &r = c.records[i];
        rows.push_back({i, r.state, r.true_distance, r.true_bias, extract_all(r)});
    }

    std::optional<feature_model_params> params;
    if (!params_path.empty())
    {
        const auto kv = key_value_file::load(params_path);
        kv.require_known({"r_max_slope", "tau_ds_offset"});
        params = feature_model_params{kv.get_double("r_max_slope", 0.0), kv.get_double("tau_ds_offset", 0.0)};
    }
    else if (fit_params)
    {
        std::vector<feature_vector> xs;
        std::vector<double> ds;
        for (const auto &r : rows)
        {
            xs.push_back(r.x);
            ds.push_back(r.d);
        }
        const auto fit = fit_feature_models(xs, ds);
        params = fit.params;
        std::cerr << "r_max_slope = " << csv_number(fit.params.r_max_slope) << " (stderr "
                  << csv_number(fit.r_max.slope_stderr) << ")\n"
                  << "tau_ds_offset = " << csv_number(fit.params.tau_ds_offset) << " (stderr "
                  << csv_number(fit.tau_ds.intercept_stderr) << ")\n";
    }
    auto out = open_out(out_path);
    write_features_csv(out, rows, params);
    return 0;
}

int correlate(const std::string &features_path, const std::string &out_path)
{
    const auto rows = read_features_csv(load_csv(features_path));
    std::ostringstream text;
    text << "state";
    for (std::size_t j = 0; j < feature_vector::size; ++j)
        text << ",x" << j;
    text << ",d\n";
    for (const auto state : {channel_state::nlos, channel_state::los})
    {
        std::vector<double> b, d;
        std::vector<std::vector<double>> x(feature_vector::size);
        for (const auto &r : rows)
        {
            if (r.state != state)
                continue;
            b.push_back(r.b);
            d.push_back(r.d);
            const auto a = r.x.as_array();
            for (std::size_t j = 0; j < a.size(); ++j)
                x[j].push_back(a[j]);
        }
        auto cell = [&](const std::vector<double> &v) -> std::string {
            try
            {
                return csv_number(std::abs(correlation_coefficient(b, v)));
            }
            catch (const domain_error &)
            {
                return "nan"; // zero variance (LOS bias is identically zero) or too few records
            }
        };
        text << to_string(state);
        for (const auto &col : x)
            text << ',' << cell(col);
        text << ',' << cell(d) << '\n';
    }
    if (out_path.empty())
        std::cout << text.str();
    else
        open_out(out_path) << text.str();
    return 0;
}

int simulate(const std::string &corpus_path, const std::string &noise_path, std::uint64_t seed,
             const std::string &out_path)
{
    const auto c = load_corpus(corpus_path);
    const auto noise = load_noise(noise_path);
    auto out = open_out(out_path);
    out << "record_id,state,d,b,tau,x0,x1,x2,x3,x4,x5\n";
    for (std::size_t i = 0; i < c.records.size(); ++i)
    {
        const auto &r = c.records[i];
        auto rng = make_stream(seed, i);
        const double tau = simulate_toa(r, noise, rng);
        out << i << ',' << to_string(r.state) << ',' << csv_number(r.true_distance) << ',' << csv_number(r.true_bias)
            << ',' << csv_number(tau);
        for (double v : extract_all(r).as_array())
            out << ',' << csv_number(v);
        out << '\n';
    }
    return 0;
}

int fit_density(const std::string &features_path, const std::string &mode, std::size_t dims,
                const std::string &param, double p_los, double wall, const std::string &out_path)
{
    const auto rows = read_features_csv(load_csv(features_path));
    std::vector<training_sample> samples;
    for (const auto &r : rows)
        samples.push_back({r.state, r.d, r.b, r.x});
    density_options opt;
    opt.kind = parse_estimator_kind(mode);
    opt.dims = dims;
    opt.param = parse_parameterization(param);
    opt.p_los = p_los;
    opt.wall_thickness = wall;
    const auto m = build_density_model(samples, opt);
    save_density_model(out_path, m);
    std::cout << "model " << to_string(m.kind) << ' ' << m.dims << "-D " << to_string(m.param) << " -> " << out_path
              << '\n';
    if (m.kind == estimator_kind::fitted)
    {
        std::cout << "held-out mean log-likelihood: LOS " << m.los_fit->heldout_loglik << ", NLOS "
                  << m.nlos_fit->heldout_loglik << '\n';
        for (const auto *f : {&*m.los_fit, &*m.nlos_fit})
            if (!f->warning.empty())
                std::cerr << "warning: " << f->warning << '\n';
    }
    else if (m.nlos_hist.clamped_samples + m.los_hist.clamped_samples > 0)
        std::cerr << "warning: " << m.nlos_hist.clamped_samples + m.los_hist.clamped_samples
                  << " samples clamped into edge bins\n";
    return 0;
}

int localize(const std::string &scenario_path, const std::string &algo_name, const std::string &model_path,
             const std::string &noise_path, double step, double half_extent)
{
    const auto s = read_scenario_csv(load_csv(scenario_path), load_noise(noise_path));
    if (const auto w = s.validate(); !w.empty())
        std::cerr << "warning: " << w << '\n';
    const auto algo = parse_algorithm(algo_name);
    const auto anchors = s.anchors();
    const auto grid = default_grid(anchors, step, half_extent);

    std::optional<density_model> model;
    if (required_model(algo).needed)
    {
        if (model_path.empty())
            throw config_error("algorithm " + algo_name + " needs --model");
        model = load_density_model(model_path);
    }

    position_estimate e;
    switch (algo)
    {
    case algorithm::ls:
        e = ls_localize(s, grid);
        break;
    case algorithm::ve:
        e = ve_localize(s, *model, grid);
        break;
    case algorithm::ml4dit:
    case algorithm::ml2dit:
        e = ml_it_localize(s, *model, grid);
        break;
    default:
        e = ml_localize(s, *model, grid);
        break;
    }
    e.algo = algo;

    std::cout << "algorithm " << display_name(algo) << '\n'
              << "theta " << csv_number(e.theta.x) << ' ' << csv_number(e.theta.y) << '\n'
              << "score " << csv_number(e.score) << '\n';
    for (std::size_t i = 0; i < s.links.size(); ++i)
    {
        const auto &l = s.links[i];
        const double d = distance(e.theta, l.anchor);
        std::cout << "link " << i << " anchor " << csv_number(l.anchor.x) << ' ' << csv_number(l.anchor.y)
                  << " residual_m " << csv_number(speed_of_light * l.tau - d);
        if (i < e.bias_estimates.size())
            std::cout << " bias_s " << csv_number(e.bias_estimates[i]) << " converged " << (e.converged[i] ? 1 : 0);
        std::cout << '\n';
    }
    return 0;
}

int sweep(const std::string &config_path, const std::string &out_path, const std::string &plot_path,
          const std::string &trials_path, std::size_t threads)
{
    const std::filesystem::path cfg_file(config_path);
    auto cfg = experiment_config_from(key_value_file::load(cfg_file), cfg_file.parent_path());
    if (threads > 0)
        cfg.threads = threads;
    const experiment ex(cfg);
    const auto results = ex.run_all();
    const auto rows = summarize(results);
    {
        auto out = open_out(out_path);
        write_results_csv(out, rows);
    }
    if (!plot_path.empty())
    {
        auto out = open_out(plot_path);
        write_plot_data(out, rows);
    }
    if (!trials_path.empty())
    {
        auto out = open_out(trials_path);
        write_trials_csv(out, results);
    }
    std::size_t degenerate = 0;
    for (const auto &r : results)
        degenerate += r.degenerate ? 1 : 0;
    if (degenerate > 0)
        std::cerr << "warning: " << degenerate << " ML runs hit a floor-only likelihood and fell back to LS\n";
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"UWB NLOS bias characterization and mitigation toolkit"};
    app.require_subcommand(1);

    std::string config, out, corpus_path, params, features, noise, scenario, algo, model, plot, trials_out, mode,
        param = "dist";
    bool fit_params = false;
    std::uint64_t seed = 1;
    std::size_t dims = 2, threads = 0;
    double p_los = 0.5, wall = 0.32, step = 0.01, half_extent = 6.0;

    auto *gen = app.add_subcommand("gen-corpus", "Generate a synthetic LOS/NLOS waveform corpus");
    gen->add_option("--config", config, "key = value corpus configuration")->check(CLI::ExistingFile);
    gen->add_option("--out", out, "Output corpus file")->required();

    auto *ext = app.add_subcommand("extract", "Extract the six features of every record");
    ext->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    ext->add_option("--out", out)->required();
    auto *params_opt = ext->add_option("--params", params, "File with r_max_slope and tau_ds_offset")
                           ->check(CLI::ExistingFile);
    ext->add_flag("--fit-params", fit_params, "Fit the distance models on this corpus")->excludes(params_opt);

    auto *cor = app.add_subcommand("correlate", "Absolute correlation of the bias with each feature");
    cor->add_option("--features", features)->required()->check(CLI::ExistingFile);
    cor->add_option("--out", out, "Output CSV (stdout when omitted)");

    auto *sim = app.add_subcommand("simulate", "Synthesize one TOA observation per record");
    sim->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    sim->add_option("--noise", noise, "gamma / sigma_n2 / beta file")->check(CLI::ExistingFile);
    sim->add_option("--seed", seed);
    sim->add_option("--out", out)->required();

    auto *fit = app.add_subcommand("fit-density", "Build a joint bias/feature density model");
    fit->add_option("--features", features)->required()->check(CLI::ExistingFile);
    fit->add_option("--mode", mode)->required()->check(CLI::IsMember({"raw", "interp", "fitted"}));
    fit->add_option("--dims", dims)->check(CLI::IsMember({1, 2, 4}));
    fit->add_option("--param", param)->check(CLI::IsMember({"dist", "distfree"}));
    fit->add_option("--p-los", p_los)->check(CLI::Range(0.0, 1.0));
    fit->add_option("--wall-thickness", wall)->check(CLI::PositiveNumber);
    fit->add_option("--out", out)->required();

    auto *loc = app.add_subcommand("localize", "Estimate the position for one scenario");
    loc->add_option("--scenario", scenario)->required()->check(CLI::ExistingFile);
    loc->add_option("--algo", algo)
        ->required()
        ->check(CLI::IsMember({"ls", "ve", "ml4d", "ml2d", "ml2did", "ml4df", "ml4dit", "ml2dit"}));
    loc->add_option("--model", model)->check(CLI::ExistingFile);
    loc->add_option("--noise", noise)->check(CLI::ExistingFile);
    loc->add_option("--grid-step", step)->check(CLI::PositiveNumber);
    loc->add_option("--half-extent", half_extent)->check(CLI::PositiveNumber);

    auto *swp = app.add_subcommand("sweep", "Monte-Carlo RMSE versus P_LOS");
    swp->add_option("--config", config)->required()->check(CLI::ExistingFile);
    swp->add_option("--out", out)->required();
    swp->add_option("--plot-data", plot);
    swp->add_option("--trials-out", trials_out, "Per-trial CSV");
    swp->add_option("--threads", threads, "Worker threads (overrides the config)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        if (*gen)
            return gen_corpus(config, out);
        if (*ext)
            return extract(corpus_path, out, params, fit_params);
        if (*cor)
            return correlate(features, out);
        if (*sim)
            return simulate(corpus_path, noise, seed, out);
        if (*fit)
            return fit_density(features, mode, dims, param, p_los, wall, out);
        if (*loc)
            return localize(scenario, algo, model, noise, step, half_extent);
        if (*swp)
            return sweep(config, out, plot, trials_out, threads);
    }
    catch (const config_error &e)
    {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
