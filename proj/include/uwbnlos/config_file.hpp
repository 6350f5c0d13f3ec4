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

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uwbnlos
{

/// Flat `key = value` text configuration. Blank lines and `#` comments are ignored.
/// Unknown keys are rejected by `require_known` so typos fail loudly.
class key_value_file
{
public:
    static key_value_file parse(std::istream &in, const std::string &source = "<stream>");
    static key_value_file load(const std::filesystem::path &path);

    bool contains(std::string_view key) const;
    std::optional<std::string> get(std::string_view key) const;

    double get_double(std::string_view key, double fallback) const;
    std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const;
    std::string get_string(std::string_view key, const std::string &fallback) const;
    /// Comma-separated list of numbers.
    std::vector<double> get_list(std::string_view key, const std::vector<double> &fallback) const;

    void require_known(std::initializer_list<std::string_view> keys) const;

    const std::map<std::string, std::string, std::less<>> &entries() const { return entries_; }

private:
    std::string source_;
    std::map<std::string, std::string, std::less<>> entries_;
};

} // namespace uwbnlos
