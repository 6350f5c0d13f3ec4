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

#include "uwbnlos/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uwbnlos
{

class key_value_file;

enum class channel_state
{
    los,
    nlos
};

std::string_view to_string(channel_state s);
channel_state parse_channel_state(std::string_view text);

// Saleh-Valenzuela style multipath parameters. Rates in 1/s, decays in s (power decay constants).
struct multipath_params
{
    double cluster_arrival_rate = 1.0 / 10e-9;
    double ray_arrival_rate = 1.0 / 0.6e-9;
    double cluster_decay = 12e-9;
    double ray_decay = 4e-9;
    double ray_power = 0.1;           // mean ray power at zero excess delay, relative to the direct path
    double ray_power_spread = 1.0;    // per-record log-normal spread (natural-log std) of ray_power
    double distance_decay_slope = 0.2; // relative growth of both decays per metre beyond d_min
    double nlos_decay_factor = 0.7;   // decay multiplier 1 + factor * (b - b_wall) / b_wall
    double wall_attenuation = 3.0;    // amplitude factor 1 - k * (b - b_wall) / (b_max - b_wall) ...
    double wall_attenuation_floor = 0.1; // ... clipped from below at this value
    double noise_floor = 5e-4;        // AWGN standard deviation, volts
    double pulse_center_frequency = 4.7e9;
    double pulse_decay = 0.25e-9;     // envelope time constant of the damped-cosine pulse
};

struct corpus_config
{
    std::size_t n_los = 105;
    std::size_t n_nlos = 174;
    double sample_rate = 24.2e9;
    double duration = 200e-9;
    double wall_thickness = 0.32;
    double d_min = 1.0;
    double d_max = 5.0;
    double path_loss_exponent = 2.0;
    double bias_scale = 0.9e-9;  // mean of the (untruncated) exponential excess over the wall delay
    double max_bias_factor = 5.0; // b_max = max_bias_factor * wall_thickness / c0
    std::uint64_t seed = 20100;
    multipath_params multipath;

    /// Lower edge of the NLOS bias support, t_wall / c0.
    double bias_floor() const;
    /// Upper edge of the NLOS bias support.
    double bias_ceiling() const;
    std::size_t samples_per_record() const;

    /// Throws config_error when an invariant is violated.
    void validate() const;
};

corpus_config corpus_config_from(const key_value_file &kv);
/// Writes every field as `key = value` with round-trip precision.
void write_corpus_config(std::ostream &out, const corpus_config &cfg);

struct waveform_record
{
    std::vector<double> samples;
    double sample_rate = 0.0;
    double t0 = 0.0; // time of sample 0 relative to the transmission instant
    double true_distance = 0.0;
    double true_bias = 0.0;
    channel_state state = channel_state::los;

    double sample_period() const { return 1.0 / sample_rate; }
    double time_of(std::size_t n) const { return t0 + static_cast<double>(n) / sample_rate; }

    friend bool operator==(const waveform_record &, const waveform_record &) = default;
};

/// NLOS bias draw: LOS gives exactly 0, NLOS a shifted exponential truncated to [b_wall, b_max].
double draw_bias(const corpus_config &cfg, channel_state state, rng_stream &rng);

/// Synthesizes one received waveform at distance d (d_min <= d <= d_max).
waveform_record generate_waveform(const corpus_config &cfg, channel_state state, double d, rng_stream &rng);

/// n_los LOS records followed by n_nlos NLOS records, each from its own stream split off cfg.seed.
std::vector<waveform_record> generate_corpus(const corpus_config &cfg);

/// Damped-cosine pulse envelope used by the generator, sampled at cfg.sample_rate.
std::vector<double> pulse_shape(const corpus_config &cfg);

// ---- Persistence ----------------------------------------------------------------------------

inline constexpr std::string_view corpus_magic = "UWBNLOS-CORPUS";
inline constexpr int corpus_format_version = 1;

class corpus_format_error : public std::runtime_error
{
public:
    corpus_format_error(const std::string &what, long record_index)
        : std::runtime_error(what), record_index_(record_index) {}
    /// Index of the record being decoded when the failure occurred, -1 for header errors.
    long record_index() const { return record_index_; }

private:
    long record_index_;
};

class corpus_version_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct corpus
{
    corpus_config config;
    std::vector<waveform_record> records;
};

void save_corpus(const std::filesystem::path &path, const corpus &c);
corpus load_corpus(const std::filesystem::path &path);

void write_corpus(std::ostream &out, const corpus &c);
corpus read_corpus(std::istream &in);

} // namespace uwbnlos
