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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrflab/errors.hpp"

namespace mrflab {

using Vertex = std::uint32_t;

struct Edge {
    Vertex a; // a < b
    Vertex b;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class NeighborhoodOrder { first, second };

inline std::string to_string(NeighborhoodOrder order)
{
    return order == NeighborhoodOrder::first ? "first" : "second";
}

/**
 * Natural undirected graph over areal units.
 *
 * Edges are stored once with a < b, sorted lexicographically, and the
 * adjacency is kept in compressed (CSR) form so that neighbor iteration in
 * the samplers touches contiguous memory. Immutable after construction.
 */
class Nug {
public:
    Nug() = default;

    /// Generic constructor from an edge list. Rejects self-loops, duplicates
    /// and out-of-range endpoints; orientation of the input pairs is free.
    Nug(std::size_t n_vertices, std::vector<std::pair<Vertex, Vertex>> pairs)
        : n_(n_vertices)
    {
        edges_.reserve(pairs.size());
        for (auto [i, j] : pairs) {
            detail::require(i < n_ && j < n_, "edge endpoint out of range");
            detail::require(i != j, "self-loop at vertex " + std::to_string(i));
            edges_.push_back(i < j ? Edge{i, j} : Edge{j, i});
        }
        std::sort(edges_.begin(), edges_.end());
        detail::require(std::adjacent_find(edges_.begin(), edges_.end()) == edges_.end(),
                        "duplicate edge in edge list");
        build_adjacency();
    }

    std::size_t n_vertices() const noexcept { return n_; }
    std::size_t n_edges() const noexcept { return edges_.size(); }
    std::span<const Edge> edges() const noexcept { return edges_; }

    std::span<const Vertex> neighbors(Vertex i) const
    {
        detail::require(i < n_, "vertex " + std::to_string(i) + " out of range");
        return {adjacency_.data() + offsets_[i], adjacency_.data() + offsets_[i + 1]};
    }

    /// Unchecked neighbor access for inner loops.
    std::span<const Vertex> neighbors_unchecked(Vertex i) const noexcept
    {
        return {adjacency_.data() + offsets_[i], adjacency_.data() + offsets_[i + 1]};
    }

    std::size_t degree(Vertex i) const { return neighbors(i).size(); }

    std::size_t max_degree() const noexcept
    {
        std::size_t d = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            d = std::max<std::size_t>(d, offsets_[i + 1] - offsets_[i]);
        }
        return d;
    }

    bool adjacent(Vertex i, Vertex j) const
    {
        auto nb = neighbors(i);
        return std::binary_search(nb.begin(), nb.end(), j);
    }

    std::optional<std::size_t> rows() const noexcept { return rows_; }
    std::optional<std::size_t> cols() const noexcept { return cols_; }

    friend Nug build_lattice(std::size_t rows, std::size_t cols, NeighborhoodOrder order);

private:
    void build_adjacency()
    {
        std::vector<std::size_t> degree(n_, 0);
        for (const auto& e : edges_) {
            ++degree[e.a];
            ++degree[e.b];
        }
        offsets_.assign(n_ + 1, 0);
        for (std::size_t i = 0; i < n_; ++i) {
            offsets_[i + 1] = offsets_[i] + degree[i];
        }
        adjacency_.assign(offsets_[n_], 0);
        std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
        for (const auto& e : edges_) {
            adjacency_[fill[e.a]++] = e.b;
            adjacency_[fill[e.b]++] = e.a;
        }
        for (std::size_t i = 0; i < n_; ++i) {
            std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                      adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
        }
    }

    std::size_t n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_{0};
    std::vector<Vertex> adjacency_;
    std::optional<std::size_t> rows_;
    std::optional<std::size_t> cols_;
};

/// Rectangular lattice with free boundaries, vertices in row-major order.
/// First order joins units sharing a border; second order adds corners.
inline Nug build_lattice(std::size_t rows, std::size_t cols, NeighborhoodOrder order)
{
    detail::require(rows >= 1 && cols >= 1, "lattice dimensions must be at least 1x1");
    const auto id = [cols](std::size_t r, std::size_t c) {
        return static_cast<Vertex>(r * cols + c);
    };
    std::vector<std::pair<Vertex, Vertex>> pairs;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c + 1 < cols) pairs.emplace_back(id(r, c), id(r, c + 1));
            if (r + 1 < rows) pairs.emplace_back(id(r, c), id(r + 1, c));
            if (order == NeighborhoodOrder::second && r + 1 < rows) {
                if (c + 1 < cols) pairs.emplace_back(id(r, c), id(r + 1, c + 1));
                if (c > 0) pairs.emplace_back(id(r, c), id(r + 1, c - 1));
            }
        }
    }
    Nug g(rows * cols, std::move(pairs));
    g.rows_ = rows;
    g.cols_ = cols;
    return g;
}

} // namespace mrflab
