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

#include "uwbnlos/config_file.hpp"

#include "uwbnlos/common.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

namespace uwbnlos
{

namespace
{

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double to_double(const std::string &text, std::string_view key, const std::string &source)
{
    try
    {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (trim(std::string_view(text).substr(used)).empty())
            return v;
    }
    catch (const std::exception &)
    {
    }
    throw config_error(source + ": key '" + std::string(key) + "' expects a number, got '" + text + "'");
}

} // namespace

key_value_file key_value_file::parse(std::istream &in, const std::string &source)
{
    key_value_file out;
    out.source_ = source;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string body = trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw config_error(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty())
            throw config_error(source + ":" + std::to_string(line_no) + ": empty key");
        if (out.entries_.contains(key))
            throw config_error(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        out.entries_.emplace(std::move(key), std::move(value));
    }
    return out;
}

key_value_file key_value_file::load(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config file " + path.string());
    return parse(in, path.string());
}

bool key_value_file::contains(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> key_value_file::get(std::string_view key) const
{
    if (auto it = entries_.find(key); it != entries_.end())
        return it->second;
    return std::nullopt;
}

double key_value_file::get_double(std::string_view key, double fallback) const
{
    const auto v = get(key);
    return v ? to_double(*v, key, source_) : fallback;
}

std::uint64_t key_value_file::get_uint(std::string_view key, std::uint64_t fallback) const
{
    const auto v = get(key);
    if (!v)
        return fallback;
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
        throw config_error(source_ + ": key '" + std::string(key) + "' expects a non-negative integer, got '" + *v + "'");
    return out;
}

std::string key_value_file::get_string(std::string_view key, const std::string &fallback) const
{
    return get(key).value_or(fallback);
}

std::vector<double> key_value_file::get_list(std::string_view key, const std::vector<double> &fallback) const
{
    const auto v = get(key);
    if (!v)
        return fallback;
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (!item.empty())
            out.push_back(to_double(item, key, source_));
    }
    return out;
}

void key_value_file::require_known(std::initializer_list<std::string_view> keys) const
{
    for (const auto &[key, value] : entries_)
    {
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw config_error(source_ + ": unknown key '" + key + "'");
    }
}

} // namespace uwbnlos
