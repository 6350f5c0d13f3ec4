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

#include "uwbnlos/common.hpp"
#include "uwbnlos/config_file.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace uwbnlos
{

std::string_view to_string(channel_state s) { return s == channel_state::los ? "LOS" : "NLOS"; }

channel_state parse_channel_state(std::string_view text)
{
    if (text == "LOS" || text == "los")
        return channel_state::los;
    if (text == "NLOS" || text == "nlos")
        return channel_state::nlos;
    throw domain_error("unknown channel state '" + std::string(text) + "'");
}

double corpus_config::bias_floor() const { return wall_thickness / speed_of_light; }

double corpus_config::bias_ceiling() const { return max_bias_factor * bias_floor(); }

std::size_t corpus_config::samples_per_record() const
{
    return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

void corpus_config::validate() const
{
    if (!(sample_rate > 0.0))
        throw config_error("sample_rate must be positive");
    if (!(duration > 0.0))
        throw config_error("duration must be positive");
    if (samples_per_record() == 0)
        throw config_error("duration * sample_rate gives an empty record");
    if (!(wall_thickness > 0.0))
        throw config_error("wall_thickness must be positive");
    if (!(d_min > 0.0) || !(d_min < d_max))
        throw config_error("distances must satisfy 0 < d_min < d_max");
    if (!(path_loss_exponent >= 0.0))
        throw config_error("path_loss_exponent must be non-negative");
    if (!(bias_scale > 0.0))
        throw config_error("bias_scale must be positive");
    if (!(max_bias_factor > 1.0))
        throw config_error("max_bias_factor must exceed 1");
    const auto &m = multipath;
    if (!(m.cluster_arrival_rate > 0.0) || !(m.ray_arrival_rate > 0.0))
        throw config_error("arrival rates must be positive");
    if (!(m.cluster_decay > 0.0) || !(m.ray_decay > 0.0))
        throw config_error("decay constants must be positive");
    if (!(m.ray_power >= 0.0) || !(m.ray_power_spread >= 0.0))
        throw config_error("ray power parameters must be non-negative");
    if (!(m.distance_decay_slope >= 0.0) || !(m.nlos_decay_factor >= 0.0))
        throw config_error("decay scaling factors must be non-negative");
    if (!(m.wall_attenuation >= 0.0) || !(m.wall_attenuation_floor > 0.0) || m.wall_attenuation_floor > 1.0)
        throw config_error("wall attenuation must be >= 0 with floor in (0, 1]");
    if (!(m.noise_floor >= 0.0))
        throw config_error("noise_floor must be non-negative");
    if (!(m.pulse_center_frequency >= 0.0) || !(m.pulse_decay > 0.0))
        throw config_error("invalid pulse parameters");
}

corpus_config corpus_config_from(const key_value_file &kv)
{
    kv.require_known({"n_los", "n_nlos", "sample_rate", "duration", "wall_thickness", "d_min", "d_max",
                      "path_loss_exponent", "bias_scale", "max_bias_factor", "seed", "cluster_arrival_rate",
                      "ray_arrival_rate", "cluster_decay", "ray_decay", "ray_power", "ray_power_spread",
                      "distance_decay_slope", "nlos_decay_factor", "wall_attenuation", "wall_attenuation_floor",
                      "noise_floor", "pulse_center_frequency", "pulse_decay"});
    corpus_config c;
    c.n_los = kv.get_uint("n_los", c.n_los);
    c.n_nlos = kv.get_uint("n_nlos", c.n_nlos);
    c.sample_rate = kv.get_double("sample_rate", c.sample_rate);
    c.duration = kv.get_double("duration", c.duration);
    c.wall_thickness = kv.get_double("wall_thickness", c.wall_thickness);
    c.d_min = kv.get_double("d_min", c.d_min);
    c.d_max = kv.get_double("d_max", c.d_max);
    c.path_loss_exponent = kv.get_double("path_loss_exponent", c.path_loss_exponent);
    c.bias_scale = kv.get_double("bias_scale", c.bias_scale);
    c.max_bias_factor = kv.get_double("max_bias_factor", c.max_bias_factor);
    c.seed = kv.get_uint("seed", c.seed);
    auto &m = c.multipath;
    m.cluster_arrival_rate = kv.get_double("cluster_arrival_rate", m.cluster_arrival_rate);
    m.ray_arrival_rate = kv.get_double("ray_arrival_rate", m.ray_arrival_rate);
    m.cluster_decay = kv.get_double("cluster_decay", m.cluster_decay);
    m.ray_decay = kv.get_double("ray_decay", m.ray_decay);
    m.ray_power = kv.get_double("ray_power", m.ray_power);
    m.ray_power_spread = kv.get_double("ray_power_spread", m.ray_power_spread);
    m.distance_decay_slope = kv.get_double("distance_decay_slope", m.distance_decay_slope);
    m.nlos_decay_factor = kv.get_double("nlos_decay_factor", m.nlos_decay_factor);
    m.wall_attenuation = kv.get_double("wall_attenuation", m.wall_attenuation);
    m.wall_attenuation_floor = kv.get_double("wall_attenuation_floor", m.wall_attenuation_floor);
    m.noise_floor = kv.get_double("noise_floor", m.noise_floor);
    m.pulse_center_frequency = kv.get_double("pulse_center_frequency", m.pulse_center_frequency);
    m.pulse_decay = kv.get_double("pulse_decay", m.pulse_decay);
    c.validate();
    return c;
}

void write_corpus_config(std::ostream &out, const corpus_config &c)
{
    char buf[64];
    auto put = [&](const char *key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << key << " = " << buf << '\n';
    };
    out << "n_los = " << c.n_los << '\n';
    out << "n_nlos = " << c.n_nlos << '\n';
    put("sample_rate", c.sample_rate);
    put("duration", c.duration);
    put("wall_thickness", c.wall_thickness);
    put("d_min", c.d_min);
    put("d_max", c.d_max);
    put("path_loss_exponent", c.path_loss_exponent);
    put("bias_scale", c.bias_scale);
    put("max_bias_factor", c.max_bias_factor);
    out << "seed = " << c.seed << '\n';
    const auto &m = c.multipath;
    put("cluster_arrival_rate", m.cluster_arrival_rate);
    put("ray_arrival_rate", m.ray_arrival_rate);
    put("cluster_decay", m.cluster_decay);
    put("ray_decay", m.ray_decay);
    put("ray_power", m.ray_power);
    put("ray_power_spread", m.ray_power_spread);
    put("distance_decay_slope", m.distance_decay_slope);
    put("nlos_decay_factor", m.nlos_decay_factor);
    put("wall_attenuation", m.wall_attenuation);
    put("wall_attenuation_floor", m.wall_attenuation_floor);
    put("noise_floor", m.noise_floor);
    put("pulse_center_frequency", m.pulse_center_frequency);
    put("pulse_decay", m.pulse_decay);
}

double draw_bias(const corpus_config &cfg, channel_state state, rng_stream &rng)
{
    if (state == channel_state::los)
        return 0.0;

    const double lo = cfg.bias_floor();
    const double hi = cfg.bias_ceiling();
    const double rate = 1.0 / cfg.bias_scale;
    // Inverse CDF of the exponential truncated to [lo, hi].
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double mass = -std::expm1(-rate * (hi - lo));
    const double b = lo - std::log1p(-u * mass) / rate;
    return std::clamp(b, lo, hi);
}

std::vector<double> pulse_shape(const corpus_config &cfg)
{
    const double fs = cfg.sample_rate;
    const double tau = cfg.multipath.pulse_decay;
    const auto length = static_cast<std::size_t>(std::ceil(12.0 * tau * fs)) + 1;
    std::vector<double> p(length);
    for (std::size_t n = 0; n < length; ++n)
    {
        const double t = static_cast<double>(n) / fs;
        p[n] = std::exp(-t / tau) * std::cos(2.0 * std::numbers::pi * cfg.multipath.pulse_center_frequency * t);
    }
    return p;
}

namespace
{

struct path
{
    double delay;
    double amplitude;
};

void add_pulse(std::vector<double> &samples, const std::vector<double> &pulse, double fs, double t0, const path &p)
{
    const double pos = std::round((p.delay - t0) * fs);
    if (pos < 0.0 || pos >= static_cast<double>(samples.size()))
        return;
    const auto k = static_cast<std::size_t>(pos);
    const std::size_t end = std::min(samples.size(), k + pulse.size());
    for (std::size_t n = k; n < end; ++n)
        samples[n] += p.amplitude * pulse[n - k];
}

} // namespace

waveform_record generate_waveform(const corpus_config &cfg, channel_state state, double d, rng_stream &rng)
{
    if (!(d >= cfg.d_min && d <= cfg.d_max))
        throw domain_error("distance " + std::to_string(d) + " m outside [d_min, d_max]");

    const auto &m = cfg.multipath;
    const bool nlos = state == channel_state::nlos;

    waveform_record rec;
    rec.sample_rate = cfg.sample_rate;
    rec.t0 = 0.0;
    rec.true_distance = d;
    rec.state = state;
    rec.true_bias = draw_bias(cfg, state, rng);

    const double b_wall = cfg.bias_floor();
    const double excess = nlos ? (rec.true_bias - b_wall) : 0.0;
    const double decay_scale =
        (1.0 + m.nlos_decay_factor * excess / b_wall) * (1.0 + m.distance_decay_slope * (d - cfg.d_min));
    const double cluster_decay = m.cluster_decay * decay_scale;
    const double ray_decay = m.ray_decay * decay_scale;
    const double wall =
        nlos ? std::max(m.wall_attenuation_floor, 1.0 - m.wall_attenuation * excess / (cfg.bias_ceiling() - b_wall))
             : 1.0;
    const double path_gain = std::pow(d, -0.5 * cfg.path_loss_exponent);
    const double first_arrival = d / speed_of_light + rec.true_bias;

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> cluster_gap(m.cluster_arrival_rate);
    std::exponential_distribution<double> ray_gap(m.ray_arrival_rate);

    std::vector<path> paths;
    paths.push_back({first_arrival, wall});

    const double ray_power = m.ray_power * std::exp(m.ray_power_spread * gauss(rng));
    if (m.ray_power > 0.0)
    {
        const double horizon = rec.t0 + cfg.duration - first_arrival;
        // First cluster starts with the direct path; later clusters start with a ray at zero excess.
        for (double T = 0.0; T < horizon; T += cluster_gap(rng))
        {
            for (double tau = (T == 0.0) ? ray_gap(rng) : 0.0; T + tau < horizon && tau < 8.0 * ray_decay;
                 tau += ray_gap(rng))
            {
                const double power = ray_power * std::exp(-T / cluster_decay - tau / ray_decay);
                const double rayleigh = std::sqrt(-std::log1p(-unit(rng)));
                const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
                paths.push_back({first_arrival + T + tau, wall * std::sqrt(power) * rayleigh * sign});
            }
        }
    }

    const auto pulse = pulse_shape(cfg);
    rec.samples.assign(cfg.samples_per_record(), 0.0);
    for (auto p : paths)
    {
        p.amplitude *= path_gain;
        add_pulse(rec.samples, pulse, cfg.sample_rate, rec.t0, p);
    }

    if (m.noise_floor > 0.0)
    {
        for (double &s : rec.samples)
            s += m.noise_floor * gauss(rng);
    }
    return rec;
}

std::vector<waveform_record> generate_corpus(const corpus_config &cfg)
{
    cfg.validate();
    constexpr std::uint64_t nlos_stream_base = 1ULL << 32;

    std::vector<waveform_record> out;
    out.reserve(cfg.n_los + cfg.n_nlos);
    auto one = [&](channel_state state, std::uint64_t stream) {
        auto rng = make_stream(cfg.seed, stream);
        const double d = std::uniform_real_distribution<double>(cfg.d_min, cfg.d_max)(rng);
        out.push_back(generate_waveform(cfg, state, d, rng));
    };
    for (std::size_t i = 0; i < cfg.n_los; ++i)
        one(channel_state::los, i);
    for (std::size_t i = 0; i < cfg.n_nlos; ++i)
        one(channel_state::nlos, nlos_stream_base + i);
    return out;
}

// ---- Persistence ----------------------------------------------------------------------------
//
// Layout: ASCII header lines
//   UWBNLOS-CORPUS
//   version = 1
//   record_count = N
//   samples_encoding = float64-le
//   <corpus_config echo, one `key = value` per line>
//   end_header
// followed by N binary records, each
//   u32 state (0 = LOS, 1 = NLOS), u32 reserved (0),
//   f64 sample_rate, f64 t0, f64 true_distance, f64 true_bias,
//   u64 sample_count, sample_count x f64 samples
// with every integer and IEEE-754 double stored little-endian.

namespace
{

void put_u64(std::ostream &out, std::uint64_t v)
{
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), 8);
}

void put_u32(std::ostream &out, std::uint32_t v)
{
    std::array<char, 4> b;
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), 4);
}

void put_f64(std::ostream &out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class record_reader
{
public:
    record_reader(std::istream &in, long index) : in_(in), index_(index) {}

    std::uint64_t u64(const char *field)
    {
        std::array<unsigned char, 8> b;
        read(b.data(), 8, field);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i)
            v = (v << 8) | b[i];
        return v;
    }

    std::uint32_t u32(const char *field)
    {
        std::array<unsigned char, 4> b;
        read(b.data(), 4, field);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | b[i];
        return v;
    }

    double f64(const char *field) { return std::bit_cast<double>(u64(field)); }

    [[noreturn]] void fail(const std::string &msg) const
    {
        throw corpus_format_error("corpus record " + std::to_string(index_) + ": " + msg, index_);
    }

private:
    void read(unsigned char *dst, std::size_t n, const char *field)
    {
        in_.read(reinterpret_cast<char *>(dst), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            fail(std::string("truncated while reading ") + field);
    }

    std::istream &in_;
    long index_;
};

} // namespace

void write_corpus(std::ostream &out, const corpus &c)
{
    out << corpus_magic << '\n';
    out << "version = " << corpus_format_version << '\n';
    out << "record_count = " << c.records.size() << '\n';
    out << "samples_encoding = float64-le\n";
    write_corpus_config(out, c.config);
    out << "end_header\n";
    for (const auto &r : c.records)
    {
        put_u32(out, r.state == channel_state::los ? 0u : 1u);
        put_u32(out, 0u);
        put_f64(out, r.sample_rate);
        put_f64(out, r.t0);
        put_f64(out, r.true_distance);
        put_f64(out, r.true_bias);
        put_u64(out, r.samples.size());
        for (double s : r.samples)
            put_f64(out, s);
    }
}

corpus read_corpus(std::istream &in)
{
    std::string line;
    if (!std::getline(in, line) || line != corpus_magic)
        throw corpus_format_error("not a corpus file (bad magic)", -1);

    std::stringstream config_text;
    long version = -1;
    long long record_count = -1;
    bool terminated = false;
    while (std::getline(in, line))
    {
        if (line == "end_header")
        {
            terminated = true;
            break;
        }
        auto starts = [&](std::string_view p) { return line.rfind(p, 0) == 0; };
        try
        {
            if (starts("version = "))
                version = std::stol(line.substr(10));
            else if (starts("record_count = "))
                record_count = std::stoll(line.substr(15));
            else if (starts("samples_encoding = "))
            {
                if (line.substr(19) != "float64-le")
                    throw corpus_format_error("unsupported sample encoding '" + line.substr(19) + "'", -1);
            }
            else
                config_text << line << '\n';
        }
        catch (const std::logic_error &)
        {
            throw corpus_format_error("malformed header line '" + line + "'", -1);
        }
    }
    if (!terminated)
        throw corpus_format_error("header not terminated by end_header", -1);
    if (version != corpus_format_version)
        throw corpus_version_error("corpus format version " + std::to_string(version) + " is not supported (expected " +
                                   std::to_string(corpus_format_version) + ")");
    if (record_count < 0)
        throw corpus_format_error("missing record_count", -1);

    corpus c;
    try
    {
        c.config = corpus_config_from(key_value_file::parse(config_text, "corpus header"));
    }
    catch (const config_error &e)
    {
        throw corpus_format_error(std::string("invalid config echo: ") + e.what(), -1);
    }

    c.records.reserve(static_cast<std::size_t>(record_count));
    for (long i = 0; i < record_count; ++i)
    {
        record_reader rd(in, i);
        waveform_record r;
        const auto state = rd.u32("state");
        if (state > 1)
            rd.fail("invalid channel state code " + std::to_string(state));
        r.state = state == 0 ? channel_state::los : channel_state::nlos;
        if (rd.u32("reserved") != 0)
            rd.fail("reserved field is not zero");
        r.sample_rate = rd.f64("sample_rate");
        r.t0 = rd.f64("t0");
        r.true_distance = rd.f64("true_distance");
        r.true_bias = rd.f64("true_bias");
        const auto n = rd.u64("sample_count");
        if (n == 0 || n > (1ULL << 32))
            rd.fail("implausible sample count " + std::to_string(n));
        if (r.sample_rate != c.config.sample_rate)
            rd.fail("sample rate differs from the corpus sample rate");
        r.samples.resize(n);
        for (auto &s : r.samples)
            s = rd.f64("samples");
        c.records.push_back(std::move(r));
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw corpus_format_error("trailing bytes after record " + std::to_string(record_count - 1), record_count);
    return c;
}

void save_corpus(const std::filesystem::path &path, const corpus &c)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_corpus(out, c);
    if (!out)
        throw std::runtime_error("write to " + path.string() + " failed");
}

corpus load_corpus(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    return read_corpus(in);
}

} // namespace uwbnlos
