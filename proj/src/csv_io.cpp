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

#include "uwbnlos/csv_io.hpp"

#include "uwbnlos/common.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace uwbnlos
{

std::string csv_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::size_t csv_table::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    throw config_error("CSV column '" + std::string(name) + "' not found");
}

bool csv_table::has_column(std::string_view name) const
{
    for (const auto &h : header)
        if (h == name)
            return true;
    return false;
}

double csv_table::number(std::size_t row, std::size_t col) const
{
    const auto &s = rows.at(row).at(col);
    std::size_t pos = 0;
    double v = 0.0;
    try
    {
        v = std::stod(s, &pos);
    }
    catch (const std::exception &)
    {
        pos = 0;
    }
    if (pos == 0 || pos != s.size())
    {
        // nan/inf spellings are accepted by stod; anything else is an error.
        throw config_error("CSV row " + std::to_string(row + 2) + ", column '" + header.at(col) + "': invalid number '" +
                           s + "'");
    }
    return v;
}

namespace
{

std::vector<std::string> split(const std::string &line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
    {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
            cell.pop_back();
        cell.erase(0, cell.find_first_not_of(' '));
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

} // namespace

csv_table read_csv(std::istream &in, const std::string &source)
{
    csv_table t;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line))
    {
        ++number;
        if (line.empty() || line == "\r")
            continue;
        auto cells = split(line);
        if (t.header.empty())
        {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw config_error(source + ":" + std::to_string(number) + ": expected " + std::to_string(t.header.size()) +
                               " columns, found " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty())
        throw config_error(source + ": empty CSV file");
    return t;
}

csv_table load_csv(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open " + path.string());
    return read_csv(in, path.string());
}

void write_csv_row(std::ostream &out, std::span<const std::string> cells)
{
    for (std::size_t i = 0; i < cells.size(); ++i)
        out << (i ? "," : "") << cells[i];
    out << '\n';
}

void write_features_csv(std::ostream &out, std::span<const feature_row> rows,
                        const std::optional<feature_model_params> &params)
{
    out << "record_id,state,d,b,x0,x1,x2,x3,x4,x5";
    if (params)
        out << ",r_max0,tau_m_slope,tau_ds_slope";
    out << '\n';
    for (const auto &r : rows)
    {
        out << r.record_id << ',' << to_string(r.state) << ',' << csv_number(r.d) << ',' << csv_number(r.b);
        for (double v : r.x.as_array())
            out << ',' << csv_number(v);
        if (params)
        {
            const auto f = to_distance_free(r.x, r.d, *params);
            out << ',' << csv_number(f.r_max0) << ',' << csv_number(f.tau_m_slope) << ',' << csv_number(f.tau_ds_slope);
        }
        out << '\n';
    }
}

std::vector<feature_row> read_features_csv(const csv_table &t)
{
    const auto c_id = t.column("record_id"), c_state = t.column("state"), c_d = t.column("d"), c_b = t.column("b");
    std::array<std::size_t, feature_vector::size> c_x{};
    for (std::size_t j = 0; j < c_x.size(); ++j)
        c_x[j] = t.column("x" + std::to_string(j));

    std::vector<feature_row> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
    {
        feature_row f;
        f.record_id = static_cast<std::size_t>(t.number(r, c_id));
        try
        {
            f.state = parse_channel_state(t.rows[r][c_state]);
        }
        catch (const domain_error &e)
        {
            throw config_error("CSV row " + std::to_string(r + 2) + ": " + e.what());
        }
        f.d = t.number(r, c_d);
        f.b = t.number(r, c_b);
        std::array<double, feature_vector::size> x{};
        for (std::size_t j = 0; j < x.size(); ++j)
            x[j] = t.number(r, c_x[j]);
        f.x = feature_vector::from_array(x);
        out.push_back(f);
    }
    return out;
}

void write_scenario_csv(std::ostream &out, const scenario &s)
{
    out << "anchor_x,anchor_y,tau,x0,x1,x2,x3,x4,x5\n";
    for (const auto &l : s.links)
    {
        out << csv_number(l.anchor.x) << ',' << csv_number(l.anchor.y) << ',' << csv_number(l.tau);
        for (double v : l.features.as_array())
            out << ',' << csv_number(v);
        out << '\n';
    }
}

scenario read_scenario_csv(const csv_table &t, const noise_model &noise)
{
    const auto cx = t.column("anchor_x"), cy = t.column("anchor_y"), ct = t.column("tau");
    std::array<std::size_t, feature_vector::size> c_x{};
    for (std::size_t j = 0; j < c_x.size(); ++j)
        c_x[j] = t.column("x" + std::to_string(j));
    scenario s;
    s.noise = noise;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
    {
        ranging_observation o;
        o.anchor = {t.number(r, cx), t.number(r, cy)};
        o.tau = t.number(r, ct);
        std::array<double, feature_vector::size> x{};
        for (std::size_t j = 0; j < x.size(); ++j)
            x[j] = t.number(r, c_x[j]);
        o.features = feature_vector::from_array(x);
        s.links.push_back(o);
    }
    return s;
}

} // namespace uwbnlos
