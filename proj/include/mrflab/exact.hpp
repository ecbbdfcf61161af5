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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mrflab/errors.hpp"
#include "mrflab/model.hpp"

namespace mrflab {

inline constexpr std::uint64_t default_enumeration_cap = std::uint64_t{1} << 24;

/// Mixed-radix index of a configuration; site 0 is the least significant digit.
inline std::uint64_t configuration_index(const Configuration& y)
{
    std::uint64_t index = 0;
    for (std::size_t i = y.size(); i-- > 0;) {
        index = index * static_cast<std::uint64_t>(y.k) + y[i];
    }
    return index;
}

inline Configuration configuration_from_index(std::uint64_t index, std::size_t n, int k)
{
    Configuration y = Configuration::constant(n, k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<State>(index % static_cast<std::uint64_t>(k));
        index /= static_cast<std::uint64_t>(k);
    }
    return y;
}

struct ExactSummary {
    std::size_t n = 0;
    int k = 2;
    double log_partition = 0.0;
    std::vector<double> statistic_means;
    std::vector<double> statistic_variances;
    std::vector<double> statistic_covariance; // d x d, row-major
    std::vector<double> distribution;         // by configuration_index; empty unless requested
};

struct EnumerationOptions {
    std::uint64_t cap = default_enumeration_cap;
    bool with_distribution = false;
    unsigned workers = 1;
};

namespace detail {

// Streaming log-sum-exp accumulator carrying weighted first and second
// moments of a statistic vector, all scaled by exp(-max_log_weight).
struct MomentAccumulator {
    double max_lw = -std::numeric_limits<double>::infinity();
    double s0 = 0.0;
    std::vector<double> s1;
    std::vector<double> s2;

    explicit MomentAccumulator(std::size_t d = 0) : s1(d, 0.0), s2(d * d, 0.0) {}

    void rescale(double new_max)
    {
        if (max_lw == -std::numeric_limits<double>::infinity()) {
            max_lw = new_max;
            return;
        }
        const double f = std::exp(max_lw - new_max);
        s0 *= f;
        for (auto& v : s1) v *= f;
        for (auto& v : s2) v *= f;
        max_lw = new_max;
    }

    void add(double lw, std::span<const double> t)
    {
        if (lw > max_lw) rescale(lw);
        const double w = std::exp(lw - max_lw);
        s0 += w;
        const std::size_t d = s1.size();
        for (std::size_t a = 0; a < d; ++a) {
            s1[a] += w * t[a];
            for (std::size_t b = 0; b < d; ++b) s2[a * d + b] += w * t[a] * t[b];
        }
    }

    void merge(const MomentAccumulator& other)
    {
        if (other.s0 == 0.0) return;
        MomentAccumulator o = other;
        const double m = std::max(max_lw, o.max_lw);
        rescale(m);
        o.rescale(m);
        s0 += o.s0;
        for (std::size_t a = 0; a < s1.size(); ++a) s1[a] += o.s1[a];
        for (std::size_t a = 0; a < s2.size(); ++a) s2[a] += o.s2[a];
    }
};

inline std::uint64_t checked_state_count(std::size_t n, int k, std::uint64_t cap)
{
    const double count = std::pow(static_cast<double>(k), static_cast<double>(n));
    if (count > static_cast<double>(cap)) {
        throw ResourceLimitError("exact enumeration needs k^n = " + std::to_string(k) + "^" + std::to_string(n) +
                                 " configurations, above the cap of " + std::to_string(cap));
    }
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::uint64_t>(k);
    return total;
}

/**
 * Enumerates all k^n configurations in a fixed number of contiguous chunks
 * and reduces chunk accumulators in chunk order, so the result does not depend
 * on the worker count. `visit(y, index)` must return (log weight, statistics).
 */
template <typename Visit>
MomentAccumulator enumerate_chunked(std::size_t n, int k, std::size_t dim, const EnumerationOptions& opts,
                                    std::vector<double>* log_weights, Visit&& visit)
{
    const std::uint64_t total = checked_state_count(n, k, opts.cap);
    const std::uint64_t chunks = std::min<std::uint64_t>(64, total);
    std::vector<MomentAccumulator> partial(chunks, MomentAccumulator(dim));
    if (log_weights) log_weights->assign(total, 0.0);

    auto run_chunk = [&](std::uint64_t c) {
        const std::uint64_t begin = c * total / chunks;
        const std::uint64_t end = (c + 1) * total / chunks;
        Configuration y = configuration_from_index(begin, n, k);
        std::vector<double> t;
        for (std::uint64_t idx = begin; idx < end; ++idx) {
            const double lw = visit(y, t);
            partial[c].add(lw, t);
            if (log_weights) (*log_weights)[idx] = lw;
            // mixed-radix increment
            for (std::size_t i = 0; i < n; ++i) {
                if (++y[i] < k) break;
                y[i] = 0;
            }
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(chunks)));
    if (workers == 1) {
        for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::uint64_t c = next++; c < chunks; c = next++) run_chunk(c);
            });
        }
        for (auto& th : pool) th.join();
    }

    MomentAccumulator acc(dim);
    for (const auto& p : partial) acc.merge(p);
    return acc;
}

inline ExactSummary summarize(const MomentAccumulator& acc, std::size_t n, int k)
{
    ExactSummary s;
    s.n = n;
    s.k = k;
    s.log_partition = acc.max_lw + std::log(acc.s0);
    const std::size_t d = acc.s1.size();
    s.statistic_means.resize(d);
    s.statistic_variances.resize(d);
    s.statistic_covariance.resize(d * d);
    for (std::size_t a = 0; a < d; ++a) s.statistic_means[a] = acc.s1[a] / acc.s0;
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) {
            s.statistic_covariance[a * d + b] =
                acc.s2[a * d + b] / acc.s0 - s.statistic_means[a] * s.statistic_means[b];
        }
        s.statistic_variances[a] = std::max(0.0, s.statistic_covariance[a * d + a]);
    }
    return s;
}

} // namespace detail

/// Exact log-partition function and moments of the model's sufficient
/// statistics by brute-force enumeration.
inline ExactSummary enumerate(const Model& model, const EnumerationOptions& opts = {})
{
    const std::size_t dim = model.sufficient_statistics(Configuration::constant(model.n(), model.k(), 0)).size();
    std::vector<double> log_weights;
    const auto acc = detail::enumerate_chunked(model.n(), model.k(), dim, opts,
                                               opts.with_distribution ? &log_weights : nullptr,
                                               [&](const Configuration& y, std::vector<double>& t) {
                                                   t = model.sufficient_statistics(y);
                                                   return model.unnormalized_log_density(y);
                                               });
    auto summary = detail::summarize(acc, model.n(), model.k());
    if (opts.with_distribution) {
        summary.distribution.resize(log_weights.size());
        for (std::size_t i = 0; i < log_weights.size(); ++i) {
            summary.distribution[i] = std::exp(log_weights[i] - summary.log_partition);
        }
    }
    return summary;
}

inline ExactSummary enumerate(const Model& model, bool with_distribution)
{
    EnumerationOptions opts;
    opts.with_distribution = with_distribution;
    return enumerate(model, opts);
}

using StatisticFunction = std::function<double(const Configuration&)>;

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Exact mean and variance of an arbitrary statistic under the model.
inline Moments exact_statistic_moments(const Model& model, const StatisticFunction& statistic,
                                       const EnumerationOptions& opts = {})
{
    const auto acc = detail::enumerate_chunked(model.n(), model.k(), 1, opts, nullptr,
                                               [&](const Configuration& y, std::vector<double>& t) {
                                                   t.assign(1, statistic(y));
                                                   return model.unnormalized_log_density(y);
                                               });
    const auto s = detail::summarize(acc, model.n(), model.k());
    return {s.statistic_means[0], s.statistic_variances[0]};
}

inline double log_partition(const Model& model, const EnumerationOptions& opts = {})
{
    const auto acc = detail::enumerate_chunked(model.n(), model.k(), 0, opts, nullptr,
                                               [&](const Configuration& y, std::vector<double>& t) {
                                                   t.clear();
                                                   return model.unnormalized_log_density(y);
                                               });
    return acc.max_lw + std::log(acc.s0);
}

struct GradientCheckRow {
    std::string parameter;
    double fd_first = 0.0;    // central difference of A
    double exact_mean = 0.0;  // E[T_j]
    double fd_second = 0.0;   // second central difference of A
    double exact_variance = 0.0;

    double mean_residual() const { return std::abs(fd_first - exact_mean); }
    double variance_residual() const { return std::abs(fd_second - exact_variance); }
};

struct GradientCheckReport {
    std::vector<GradientCheckRow> rows;

    double max_mean_residual() const
    {
        double m = 0.0;
        for (const auto& r : rows) m = std::max(m, r.mean_residual());
        return m;
    }
    double max_variance_residual() const
    {
        double m = 0.0;
        for (const auto& r : rows) m = std::max(m, r.variance_residual());
        return m;
    }
    const GradientCheckRow& row(const std::string& name) const
    {
        for (const auto& r : rows)
            if (r.parameter == name) return r;
        throw std::invalid_argument("no parameter named " + name);
    }
};

/**
 * Compares finite differences of the enumerated log-partition function with
 * the exact moments: dA/dxi_j against E[T_j] and d2A/dxi_j2 against var(T_j).
 * With step h the first-derivative truncation error is O(h^2) and the
 * round-off is O(eps A / h); h = 1e-4 keeps both near 1e-8 on small lattices.
 */
inline GradientCheckReport gradient_check(const Model& model, double step = 1e-4,
                                          const EnumerationOptions& opts = {})
{
    detail::require(step > 0.0, "finite-difference step must be positive");
    const auto xi = model.natural_parameters();
    const auto names = model.parameter_names();
    EnumerationOptions plain = opts;
    plain.with_distribution = false;
    const auto exact = enumerate(model, plain);
    const double a0 = exact.log_partition;

    GradientCheckReport report;
    for (std::size_t j = 0; j < xi.size(); ++j) {
        auto plus = xi;
        auto minus = xi;
        plus[j] += step;
        minus[j] -= step;
        const double ap = log_partition(model.with_natural_parameters(plus), plain);
        const double am = log_partition(model.with_natural_parameters(minus), plain);
        GradientCheckRow row;
        row.parameter = names[j];
        row.fd_first = (ap - am) / (2.0 * step);
        row.exact_mean = exact.statistic_means[j];
        row.fd_second = (ap - 2.0 * a0 + am) / (step * step);
        row.exact_variance = exact.statistic_variances[j];
        report.rows.push_back(row);
    }
    return report;
}

/// Normalized empirical frequencies over configurations.
struct EmpiricalDistribution {
    std::size_t n = 0;
    int k = 2;
    std::map<std::uint64_t, double> probability;

    static EmpiricalDistribution from_samples(std::span<const Configuration> draws)
    {
        detail::require(!draws.empty(), "empirical distribution needs at least one draw");
        EmpiricalDistribution e;
        e.n = draws.front().size();
        e.k = draws.front().k;
        const double w = 1.0 / static_cast<double>(draws.size());
        for (const auto& y : draws) {
            detail::require(y.size() == e.n && y.k == e.k, "draws live on different state spaces");
            e.probability[configuration_index(y)] += w;
        }
        return e;
    }
};

/// Total variation distance 1/2 sum |p_hat - p|; configurations absent from
/// the empirical map count as zero.
inline double total_variation(const EmpiricalDistribution& empirical, const ExactSummary& exact)
{
    detail::require(!exact.distribution.empty(), "exact summary was computed without its distribution");
    detail::require(empirical.n == exact.n && empirical.k == exact.k, "state spaces differ");
    double tv = 0.0;
    double covered = 0.0;
    for (const auto& [idx, p] : empirical.probability) {
        detail::require(idx < exact.distribution.size(), "configuration index outside the state space");
        tv += std::abs(p - exact.distribution[idx]);
        covered += exact.distribution[idx];
    }
    // mass of configurations never observed
    double exact_total = 0.0;
    for (double p : exact.distribution) exact_total += p;
    tv += std::max(0.0, exact_total - covered);
    return 0.5 * tv;
}

} // namespace mrflab
