/*
   Copyright 2026 The mrflab Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Lookup of the shipped presets. Link against mrflab::presets, which
// provides the generated presets_data.hpp.

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrflab/experiment.hpp"
#include "mrflab/presets_data.hpp"

namespace mrflab {

inline std::vector<std::string> preset_names()
{
    std::vector<std::string> names;
    for (const auto& [name, text] : presets_data::entries) names.emplace_back(name);
    return names;
}

/// Maps a base name and scale ("paper" or "desk") to a shipped preset name.
inline std::string resolve_preset_name(std::string name, const std::string& scale)
{
    constexpr std::string_view suffix = "-desk";
    if (name.ends_with(suffix)) name.resize(name.size() - suffix.size());
    if (scale == "desk") return name + std::string(suffix);
    if (scale != "paper" && !scale.empty()) throw ConfigError("--scale", "must be 'paper' or 'desk'");
    return name;
}

inline json preset_json(const std::string& name)
{
    for (const auto& [key, text] : presets_data::entries) {
        if (key == name) return json::parse(text);
    }
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("--preset", "unknown preset '" + name + "' (known: " + known + ")");
}

} // namespace mrflab
