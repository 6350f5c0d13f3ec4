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
#include "uwbnlos/feature_extract.hpp"
#include "uwbnlos/localization.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uwbnlos
{

/// Shortest text that reads back to the same double.
std::string csv_number(double v);

/// Plain comma-separated table without quoting; the first line is the header.
struct csv_table
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws config_error when absent.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
    double number(std::size_t row, std::size_t col) const;
};

csv_table read_csv(std::istream &in, const std::string &source = "<stream>");
csv_table load_csv(const std::filesystem::path &path);
void write_csv_row(std::ostream &out, std::span<const std::string> cells);

struct feature_row
{
    std::size_t record_id = 0;
    channel_state state = channel_state::los;
    double d = 0.0;
    double b = 0.0;
    feature_vector x;

    friend bool operator==(const feature_row &, const feature_row &) = default;
};

/// Columns record_id,state,d,b,x0..x5 and, with params, r_max0,tau_m_slope,tau_ds_slope.
void write_features_csv(std::ostream &out, std::span<const feature_row> rows,
                        const std::optional<feature_model_params> &params = std::nullopt);
std::vector<feature_row> read_features_csv(const csv_table &t);

/// Columns anchor_x,anchor_y,tau,x0..x5.
void write_scenario_csv(std::ostream &out, const scenario &s);
scenario read_scenario_csv(const csv_table &t, const noise_model &noise);

} // namespace uwbnlos
