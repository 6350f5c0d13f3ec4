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

#include "uwbnlos/channel_corpus.hpp"
#include "uwbnlos/common.hpp"
#include "uwbnlos/config_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

using namespace uwbnlos;
using Catch::Matchers::WithinRel;

namespace
{

corpus_config small_config()
{
    corpus_config c;
    c.n_los = 4;
    c.n_nlos = 5;
    c.duration = 20e-9;
    return c;
}

std::uint64_t le_u64(const std::string &s, std::size_t at)
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | static_cast<unsigned char>(s[at + static_cast<std::size_t>(i)]);
    return v;
}

std::uint32_t le_u32(const std::string &s, std::size_t at)
{
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | static_cast<unsigned char>(s[at + static_cast<std::size_t>(i)]);
    return v;
}

} // namespace

TEST_CASE("channel state names", "[corpus]")
{
    CHECK(parse_channel_state("LOS") == channel_state::los);
    CHECK(parse_channel_state("nlos") == channel_state::nlos);
    CHECK(to_string(channel_state::nlos) == "NLOS");
    CHECK_THROWS_AS(parse_channel_state("maybe"), domain_error);
}

TEST_CASE("bias draws respect the wall null region and the truncated mean", "[corpus]")
{
    corpus_config c;
    auto rng = make_stream(5, 0);
    const double lo = c.bias_floor(), hi = c.bias_ceiling(), rate = 1.0 / c.bias_scale;
    CHECK_THAT(lo, WithinRel(0.32 / 299792458.0, 1e-15));
    CHECK(draw_bias(c, channel_state::los, rng) == 0.0);

    const int n = 40000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i)
    {
        const double b = draw_bias(c, channel_state::nlos, rng);
        REQUIRE(b >= lo);
        REQUIRE(b <= hi);
        sum += b;
        sum2 += b * b;
    }
    const double L = hi - lo, e = std::exp(-rate * L);
    const double mean_ref = lo + 1.0 / rate - L * e / (1.0 - e);
    const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(std::abs(mean - mean_ref) < 4.0 * sd / std::sqrt(n));
}

TEST_CASE("generated corpus has the requested shape and labels", "[corpus]")
{
    const auto cfg = small_config();
    const auto recs = generate_corpus(cfg);
    REQUIRE(recs.size() == 9);
    for (std::size_t i = 0; i < recs.size(); ++i)
    {
        const auto &r = recs[i];
        CHECK(r.state == (i < 4 ? channel_state::los : channel_state::nlos));
        CHECK(r.samples.size() == cfg.samples_per_record());
        CHECK(r.sample_rate == cfg.sample_rate);
        CHECK(r.true_distance >= cfg.d_min);
        CHECK(r.true_distance <= cfg.d_max);
        if (r.state == channel_state::los)
            CHECK(r.true_bias == 0.0);
        else
            CHECK(r.true_bias >= cfg.bias_floor());
    }
    CHECK(generate_corpus(cfg) == recs);

    auto other = cfg;
    other.seed += 1;
    CHECK(generate_corpus(other)[0].samples != recs[0].samples);
}

TEST_CASE("noise-free waveform peaks at the biased first arrival", "[corpus]")
{
    auto cfg = small_config();
    cfg.multipath.noise_floor = 0.0;
    cfg.multipath.ray_power = 0.0;
    auto rng = make_stream(1, 1);
    const auto r = generate_waveform(cfg, channel_state::nlos, 3.0, rng);
    std::size_t peak = 0;
    for (std::size_t n = 0; n < r.samples.size(); ++n)
        if (std::abs(r.samples[n]) > std::abs(r.samples[peak]))
            peak = n;
    const double arrival = 3.0 / speed_of_light + r.true_bias;
    CHECK(std::abs(r.time_of(peak) - arrival) <= 0.5 / cfg.sample_rate + 1e-15);
    CHECK_THROWS_AS(generate_waveform(cfg, channel_state::los, 0.5, rng), domain_error);
}

TEST_CASE("pulse shape length and decay", "[corpus]")
{
    corpus_config c;
    const auto p = pulse_shape(c);
    CHECK(p.size() == static_cast<std::size_t>(std::ceil(12.0 * c.multipath.pulse_decay * c.sample_rate)) + 1);
    CHECK(p[0] == 1.0);
    CHECK(std::abs(p.back()) < std::exp(-11.9));
}

TEST_CASE("config validation rejects bad values", "[corpus]")
{
    auto c = small_config();
    c.d_min = 6.0;
    CHECK_THROWS_AS(c.validate(), config_error);
    c = small_config();
    c.max_bias_factor = 1.0;
    CHECK_THROWS_AS(c.validate(), config_error);
    c = small_config();
    c.sample_rate = -1.0;
    CHECK_THROWS_AS(c.validate(), config_error);

    std::istringstream in("n_los = 3\nwall_thickness = 0.5\nnoise_floor = 0.001\n");
    const auto parsed = corpus_config_from(key_value_file::parse(in));
    CHECK(parsed.n_los == 3);
    CHECK(parsed.wall_thickness == 0.5);
    CHECK(parsed.multipath.noise_floor == 0.001);
    std::istringstream typo("n_loss = 3\n");
    CHECK_THROWS_AS(corpus_config_from(key_value_file::parse(typo)), config_error);
}

TEST_CASE("corpus file round-trips bit-exactly", "[corpus]")
{
    corpus c{small_config(), generate_corpus(small_config())};
    std::stringstream ss;
    write_corpus(ss, c);
    const auto back = read_corpus(ss);
    CHECK(back.records == c.records);
    CHECK(back.config.seed == c.config.seed);
    CHECK(back.config.multipath.cluster_decay == c.config.multipath.cluster_decay);
    CHECK(back.config.bias_scale == c.config.bias_scale);
}

TEST_CASE("corpus binary record layout", "[corpus]")
{
    corpus c{small_config(), generate_corpus(small_config())};
    std::stringstream ss;
    write_corpus(ss, c);
    const std::string bytes = ss.str();
    const auto end = bytes.find("end_header\n");
    REQUIRE(end != std::string::npos);
    CHECK(bytes.rfind("UWBNLOS-CORPUS\nversion = 1\nrecord_count = 9\nsamples_encoding = float64-le\n", 0) == 0);

    std::size_t at = end + 11;
    for (const auto &r : c.records)
    {
        CHECK(le_u32(bytes, at) == (r.state == channel_state::los ? 0u : 1u));
        CHECK(le_u32(bytes, at + 4) == 0u);
        CHECK(std::bit_cast<double>(le_u64(bytes, at + 8)) == r.sample_rate);
        CHECK(std::bit_cast<double>(le_u64(bytes, at + 16)) == r.t0);
        CHECK(std::bit_cast<double>(le_u64(bytes, at + 24)) == r.true_distance);
        CHECK(std::bit_cast<double>(le_u64(bytes, at + 32)) == r.true_bias);
        const auto n = le_u64(bytes, at + 40);
        REQUIRE(n == r.samples.size());
        CHECK(std::bit_cast<double>(le_u64(bytes, at + 48)) == r.samples[0]);
        CHECK(std::bit_cast<double>(le_u64(bytes, at + 48 + 8 * (n - 1))) == r.samples.back());
        at += 48 + 8 * n;
    }
    CHECK(at == bytes.size());
}

TEST_CASE("corpus reader diagnoses damaged files", "[corpus]")
{
    corpus c{small_config(), generate_corpus(small_config())};
    std::stringstream ss;
    write_corpus(ss, c);
    const std::string good = ss.str();

    {
        std::istringstream in("NOT-A-CORPUS\n");
        CHECK_THROWS_AS(read_corpus(in), corpus_format_error);
    }
    {
        std::string v2 = good;
        v2.replace(v2.find("version = 1"), 11, "version = 2");
        std::istringstream in(v2);
        CHECK_THROWS_AS(read_corpus(in), corpus_version_error);
    }
    {
        std::istringstream in(good.substr(0, good.size() - 100));
        try
        {
            read_corpus(in);
            FAIL("truncated corpus accepted");
        }
        catch (const corpus_format_error &e)
        {
            CHECK(e.record_index() == 8);
        }
    }
    {
        std::istringstream in(good + "x");
        CHECK_THROWS_AS(read_corpus(in), corpus_format_error);
    }
    {
        std::string bad_state = good;
        bad_state[good.find("end_header\n") + 11] = 7;
        std::istringstream in(bad_state);
        try
        {
            read_corpus(in);
            FAIL("invalid state accepted");
        }
        catch (const corpus_format_error &e)
        {
            CHECK(e.record_index() == 0);
        }
    }
}
