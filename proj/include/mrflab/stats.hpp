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

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "mrflab/errors.hpp"
#include "mrflab/model.hpp"

namespace mrflab {

// Counts are accumulated as integers and divided once at the end.

inline void require_binary(const Configuration& y, const char* what)
{
    if (y.k != 2) {
        throw UnsupportedError(std::string(what) + " is defined for binary configurations only");
    }
}

/// Proportion of sites in state 1 ("black").
inline double prop_black(const Configuration& y)
{
    require_binary(y, "prop_black");
    detail::require(y.size() > 0, "empty configuration");
    std::size_t ones = 0;
    for (State s : y.states) ones += s;
    return static_cast<double>(ones) / static_cast<double>(y.size());
}

/// Fraction of edges whose endpoints share a state.
inline double prop_matches(const Nug& nug, const Configuration& y)
{
    detail::require(nug.n_edges() >= 1, "prop_matches needs a graph with at least one edge");
    detail::require(y.size() == nug.n_vertices(), "configuration does not match the graph");
    std::size_t matches = 0;
    for (const auto& e : nug.edges()) matches += y[e.a] == y[e.b] ? 1 : 0;
    return static_cast<double>(matches) / static_cast<double>(nug.n_edges());
}

/// max(#zeros, #ones) / n.
inline double dominant_color(const Configuration& y)
{
    require_binary(y, "dominant_color");
    detail::require(y.size() > 0, "empty configuration");
    std::size_t ones = 0;
    for (State s : y.states) ones += s;
    return static_cast<double>(std::max(ones, y.size() - ones)) / static_cast<double>(y.size());
}

/// a_i = I(logistic(alpha_i) > 0.5); probability exactly one half maps to 0.
inline State field_classification(const ExternalField& field, std::size_t i)
{
    return independence_probability(field, i) > 0.5 ? 1 : 0;
}

/// 1 - (1/n) sum_i I(y_i = a_i).
inline double misclassification_rate(const Configuration& y, const ExternalField& field)
{
    require_binary(y, "misclassification_rate");
    detail::require(y.size() > 0, "empty configuration");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < y.size(); ++i) agree += y[i] == field_classification(field, i) ? 1 : 0;
    return 1.0 - static_cast<double>(agree) / static_cast<double>(y.size());
}

inline double category_count(const Configuration& y, int l)
{
    detail::require(l >= 0 && l < y.k, "category out of range");
    std::size_t c = 0;
    for (State s : y.states) c += s == l ? 1 : 0;
    return static_cast<double>(c);
}

// ---------------------------------------------------------------------------
// Statistic tags (these names appear verbatim in CSV output)
// ---------------------------------------------------------------------------

struct StatisticKind {
    enum class Tag { prop_black, prop_matches, dominant_color, misclassification, category_count, raw_t1, raw_t2 };
    Tag tag = Tag::prop_black;
    int category = 0; // category_count only

    friend bool operator==(const StatisticKind&, const StatisticKind&) = default;
};

inline std::string to_string(const StatisticKind& s)
{
    using T = StatisticKind::Tag;
    switch (s.tag) {
    case T::prop_black: return "prop_black";
    case T::prop_matches: return "prop_matches";
    case T::dominant_color: return "dominant_color";
    case T::misclassification: return "misclassification";
    case T::category_count: return "category_count(" + std::to_string(s.category) + ")";
    case T::raw_t1: return "raw_T1";
    case T::raw_t2: return "raw_T2";
    }
    return "?";
}

inline StatisticKind parse_statistic(const std::string& name)
{
    using T = StatisticKind::Tag;
    if (name == "prop_black") return {T::prop_black};
    if (name == "prop_matches") return {T::prop_matches};
    if (name == "dominant_color") return {T::dominant_color};
    if (name == "misclassification") return {T::misclassification};
    if (name == "raw_T1") return {T::raw_t1};
    if (name == "raw_T2") return {T::raw_t2};
    const std::string prefix = "category_count(";
    if (name.starts_with(prefix) && name.ends_with(")")) {
        const auto inner = name.substr(prefix.size(), name.size() - prefix.size() - 1);
        std::size_t used = 0;
        int l = -1;
        try {
            l = std::stoi(inner, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        detail::require(used == inner.size() && l >= 0, "bad category in statistic '" + name + "'");
        return {T::category_count, l};
    }
    throw std::invalid_argument("unknown statistic '" + name + "'");
}

/**
 * Evaluates a statistic on a configuration drawn from `model`.
 * raw_T1 / raw_T2 are the first singleton and first pairwise entries of the
 * model's sufficient statistics (T_1 and T_2 for the binary formulations).
 */
inline double evaluate_statistic(const StatisticKind& s, const Model& model, const Configuration& y)
{
    using T = StatisticKind::Tag;
    switch (s.tag) {
    case T::prop_black: return prop_black(y);
    case T::prop_matches: return prop_matches(model.nug(), y);
    case T::dominant_color: return dominant_color(y);
    case T::misclassification: return misclassification_rate(y, model.field());
    case T::category_count: return category_count(y, s.category);
    case T::raw_t1: {
        if (std::holds_alternative<SiteTableField>(model.field())) {
            throw UnsupportedError("raw_T1 is undefined for site-table fields");
        }
        return model.sufficient_statistics(y).front();
    }
    case T::raw_t2: {
        const auto t = model.sufficient_statistics(y);
        const auto names = model.parameter_names();
        for (std::size_t j = 0; j < names.size(); ++j) {
            if (names[j].starts_with("psi")) return t[j];
        }
        return t.back();
    }
    }
    return 0.0;
}

} // namespace mrflab
