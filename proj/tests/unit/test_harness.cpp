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

#include "../support/test_support.hpp"
#include "uwbnlos/config_file.hpp"
#include "uwbnlos/experiment_harness.hpp"

#include <cmath>
#include <sstream>

using namespace uwbnlos;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{

experiment_config quick_config()
{
    experiment_config c;
    c.p_los_values = {0.0, 0.5, 1.0};
    c.trials = 4;
    c.seed = 17;
    c.algorithms = {algorithm::ls, algorithm::ve, algorithm::ml2d, algorithm::ml2dit};
    c.grid_step = 0.05;
    return c;
}

} // namespace

TEST_CASE("anchors sit on a circle starting at the positive y axis", "[harness]")
{
    const auto a1 = place_anchor(1, 3, 2.0);
    CHECK_THAT(a1.x, WithinAbs(0.0, 1e-15));
    CHECK_THAT(a1.y, WithinAbs(2.0, 1e-15));
    const auto a2 = place_anchor(2, 3, 2.0);
    CHECK_THAT(a2.x, WithinAbs(2.0 * std::sqrt(3.0) / 2.0, 1e-15));
    CHECK_THAT(a2.y, WithinAbs(-1.0, 1e-15));
    const auto a4 = place_anchor(2, 4, 1.5);
    CHECK_THAT(a4.x, WithinAbs(1.5, 1e-15));
    CHECK_THAT(a4.y, WithinAbs(0.0, 1e-15));
    CHECK_THROWS_AS(place_anchor(0, 3, 1.0), domain_error);
    CHECK_THROWS_AS(place_anchor(4, 3, 1.0), domain_error);
}

TEST_CASE("experiment config parsing", "[harness]")
{
    std::istringstream in("corpus = data/c.bin\np_los = 0, 0.5\ntrials = 12\nalgorithms = ls, ML-2D, ml4df\n"
                          "model_ml2d = /abs/m.dm\nbeta = 0\nthreads = 2\ntabulate = 0\n");
    const auto c = experiment_config_from(key_value_file::parse(in), "/base");
    CHECK(c.corpus == std::filesystem::path("/base/data/c.bin"));
    CHECK(c.p_los_values == std::vector<double>{0.0, 0.5});
    CHECK(c.trials == 12);
    CHECK(c.algorithms == std::vector<algorithm>{algorithm::ls, algorithm::ml2d, algorithm::ml4df});
    CHECK(c.model_paths.at(algorithm::ml2d) == std::filesystem::path("/abs/m.dm"));
    CHECK(c.noise.beta == 0.0);
    CHECK(c.threads == 2);
    CHECK_FALSE(c.ml.tabulate);

    auto fails = [](const std::string &text) {
        std::istringstream s(text);
        CHECK_THROWS_AS(experiment_config_from(key_value_file::parse(s)), config_error);
    };
    fails("p_los = 0\n");
    fails("corpus = c.bin\np_los = 1.5\n");
    fails("corpus = c.bin\ntrials = 0\n");
    fails("corpus = c.bin\nalgorithms = ls, mlxx\n");
    fails("corpus = c.bin\nn_anchors = 2\n");
    fails("corpus = c.bin\nsigma_n2 = -1\n");
    fails("corpus = c.bin\ntrails = 5\n");
}

TEST_CASE("summarize computes RMSE and its delta-method error", "[harness]")
{
    std::vector<trial_result> r;
    const std::vector<double> e2{1.0, 4.0, 9.0, 16.0};
    for (std::size_t i = 0; i < e2.size(); ++i)
    {
        r.push_back({algorithm::ls, 0.5, i, {}, {}, e2[i], false});
        r.push_back({algorithm::ml2d, 0.5, i, {}, {}, 0.25 * e2[i], false});
    }
    const auto rows = summarize(r);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].algo == algorithm::ls);
    CHECK(rows[0].trials == 4);
    // mean 7.5, sample variance of e2 = 43; se(mse) = sqrt(43 / 4).
    CHECK_THAT(rows[0].rmse, WithinRel(std::sqrt(7.5), 1e-15));
    CHECK_THAT(rows[0].rmse_stderr, WithinRel(std::sqrt(43.0 / 4.0) / (2.0 * std::sqrt(7.5)), 1e-14));
    CHECK_THAT(rows[1].rmse, WithinRel(0.5 * std::sqrt(7.5), 1e-15));

    std::ostringstream csv;
    write_results_csv(csv, rows);
    CHECK(csv.str().rfind("algorithm,p_los,trials,rmse_m,rmse_stderr_m\nls,0.5,4,", 0) == 0);
    std::ostringstream tsv;
    write_plot_data(tsv, rows);
    CHECK(tsv.str().rfind("p_los\tLS\tML-2D\n0.5\t", 0) == 0);
    std::ostringstream trials;
    write_trials_csv(trials, r);
    CHECK(trials.str().find("\nml2d,0.5,3,0,0,4,0\n") != std::string::npos);
}

TEST_CASE("experiment shares models and draws labelled scenarios", "[harness]")
{
    const experiment ex(quick_config(), test::default_records());
    CHECK(&ex.model_for(algorithm::ve) == &ex.model_for(algorithm::ml2d));
    CHECK(&ex.model_for(algorithm::ml2dit) == &ex.model_for(algorithm::ml2d));
    CHECK_THROWS_AS(ex.model_for(algorithm::ml4d), domain_error);

    for (double p : {0.0, 1.0})
    {
        auto rng = make_stream(1, 1);
        const auto s = ex.draw_scenario(p, rng);
        REQUIRE(s.links.size() == 3);
        for (std::size_t i = 0; i < 3; ++i)
        {
            const auto &l = s.links[i];
            REQUIRE(l.truth);
            CHECK(l.truth->state == (p == 1.0 ? channel_state::los : channel_state::nlos));
            CHECK_THAT(norm(l.anchor), WithinRel(l.truth->d, 1e-12));
            const double err = l.tau - l.truth->d / speed_of_light - l.truth->b;
            CHECK(std::abs(err) < 6.0 * noise_stddev(s.noise, l.truth->d));
        }
    }
}

TEST_CASE("sweep results are reproducible and independent of thread count", "[harness]")
{
    auto cfg = quick_config();
    const experiment one(cfg, test::default_records());
    cfg.threads = 3;
    const experiment three(cfg, test::default_records());

    const auto a = one.run_all(), b = one.run_all(), c = three.run_all();
    REQUIRE(a.size() == 3 * 4 * 4);
    std::ostringstream sa, sb, sc;
    write_trials_csv(sa, a);
    write_trials_csv(sb, b);
    write_trials_csv(sc, c);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str() == sc.str());

    // Trial t of point k is reproducible on its own stream.
    auto rng = make_stream(17, (1ULL << 32) | 2);
    const auto single = one.run_trial(0.5, 2, rng);
    for (std::size_t j = 0; j < single.size(); ++j)
        CHECK(single[j].theta == a[4 * 4 + 2 * 4 + j].theta);

    for (const auto &r : a)
        CHECK(r.sq_error == r.theta.x * r.theta.x + r.theta.y * r.theta.y);
}

TEST_CASE("experiment rejects corpora missing a needed state", "[harness]")
{
    auto cfg = quick_config();
    std::vector<waveform_record> los(test::default_records().begin(), test::default_records().begin() + 105);
    CHECK_THROWS_AS(experiment(cfg, los), config_error);
    cfg.p_los_values = {1.0};
    cfg.algorithms = {algorithm::ls};
    CHECK_NOTHROW(experiment(cfg, los));
}
