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

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mrflab/errors.hpp"
#include "mrflab/model.hpp"
#include "mrflab/parallel.hpp"
#include "mrflab/random.hpp"
#include "mrflab/samplers.hpp"
#include "mrflab/stats.hpp"

namespace mrflab {

enum class FunctionalKind { mean, variance, sd };

inline std::string to_string(FunctionalKind f)
{
    switch (f) {
    case FunctionalKind::mean: return "mean";
    case FunctionalKind::variance: return "variance";
    case FunctionalKind::sd: return "sd";
    }
    return "?";
}

inline FunctionalKind parse_functional(const std::string& name)
{
    if (name == "mean") return FunctionalKind::mean;
    if (name == "variance") return FunctionalKind::variance;
    if (name == "sd") return FunctionalKind::sd;
    throw std::invalid_argument("unknown functional '" + name + "'");
}

/// Empirical version of a functional: sample mean, sample variance (B - 1
/// denominator), or its square root.
inline double apply_functional(FunctionalKind f, std::span<const double> values)
{
    detail::require(!values.empty(), "functional of an empty sample");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (f == FunctionalKind::mean) return mean;
    detail::require(values.size() >= 2, "variance needs at least two values");
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    return f == FunctionalKind::variance ? var : std::sqrt(var);
}

struct GridSpec {
    std::string parameter = "psi";
    std::vector<double> points;

    void validate() const
    {
        detail::require(!points.empty(), "grid '" + parameter + "' must have at least one point");
        for (std::size_t j = 1; j < points.size(); ++j) {
            detail::require(points[j] > points[j - 1], "grid '" + parameter + "' must be strictly increasing");
        }
    }

    /// start, start + step, ... up to stop (inclusive, with a small tolerance);
    /// points are start + j * step, not accumulated.
    static GridSpec range(std::string name, double start, double stop, double step)
    {
        detail::require(step > 0.0, "grid step must be positive");
        detail::require(stop >= start, "grid stop must not precede start");
        GridSpec g{std::move(name), {}};
        const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (std::size_t j = 0; j < count; ++j) g.points.push_back(start + static_cast<double>(j) * step);
        return g;
    }
};

struct NormalPrior {
    double mean = 0.0;
    double sd = 1.0;
};

/// Independent normal priors on the coefficients; sd = 0 is a point mass.
struct PriorSpec {
    std::vector<NormalPrior> coefficients;

    void validate() const
    {
        detail::require(!coefficients.empty(), "prior must name at least one coefficient");
        for (const auto& c : coefficients) {
            detail::require(c.sd >= 0.0 && std::isfinite(c.sd) && std::isfinite(c.mean),
                            "prior standard deviations must be finite and non-negative");
        }
    }
};

struct ResponsePoint {
    double value = 0.0;      // grid point w_j
    double estimate = 0.0;   // possibly smoothed
    double raw_estimate = 0.0;
    double mc_se = 0.0;
    std::size_t draws = 0;
    bool ok = true;
    std::string error;
};

struct ResponseEstimate {
    GridSpec grid;
    StatisticKind statistic;
    FunctionalKind functional = FunctionalKind::mean;
    std::vector<ResponsePoint> points;
    std::string family;
    SamplerSpec sampler;
    std::uint64_t seed = 0;

    /// Estimate at w, linearly interpolated between grid points.
    double at(double w) const
    {
        detail::require(!points.empty(), "empty response estimate");
        detail::require(w >= points.front().value - 1e-12 && w <= points.back().value + 1e-12,
                        "value outside the grid");
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (std::abs(points[j].value - w) <= 1e-12) return points[j].estimate;
            if (j + 1 < points.size() && w < points[j + 1].value) {
                const double t = (w - points[j].value) / (points[j + 1].value - points[j].value);
                return (1.0 - t) * points[j].estimate + t * points[j + 1].estimate;
            }
        }
        return points.back().estimate;
    }

    /// Grid point nearest to w.
    const ResponsePoint& nearest(double w) const
    {
        detail::require(!points.empty(), "empty response estimate");
        std::size_t best = 0;
        for (std::size_t j = 1; j < points.size(); ++j)
            if (std::abs(points[j].value - w) < std::abs(points[best].value - w)) best = j;
        return points[best];
    }
};

using ModelFamily = std::function<Model(double)>;
using PriorModelFamily = std::function<Model(double, std::span<const double>)>;

struct StudyOptions {
    unsigned workers = 1;
    std::size_t bootstrap_resamples = 200;
    // When false, a sampler failure at any grid point throws; otherwise the
    // point is marked failed and the rest of the grid is kept.
    bool keep_going = false;
    std::string family_name;
};

struct StudyResult {
    std::vector<ResponseEstimate> estimates; // statistic-major, then functional

    const ResponseEstimate& get(const StatisticKind& s, FunctionalKind f) const
    {
        for (const auto& e : estimates)
            if (e.statistic == s && e.functional == f) return e;
        throw std::invalid_argument("study has no " + to_string(s) + "/" + to_string(f) + " track");
    }

    std::vector<std::string> failures() const
    {
        std::vector<std::string> out;
        if (estimates.empty()) return out;
        for (const auto& p : estimates.front().points)
            if (!p.ok) out.push_back(p.error);
        return out;
    }
};

namespace detail {

inline constexpr std::uint64_t prior_stream_tag = 0x505249'4f52ULL;     // "PRIOR"
inline constexpr std::uint64_t bootstrap_stream_tag = 0x424f4f54ULL;    // "BOOT"

inline double bootstrap_se(FunctionalKind f, std::span<const double> values, std::size_t resamples,
                           RandomSource rng)
{
    if (values.size() < 2 || resamples < 2) return 0.0;
    std::vector<double> sample(values.size());
    std::vector<double> reps(resamples);
    for (auto& r : reps) {
        for (auto& v : sample) v = values[rng.below(values.size())];
        r = apply_functional(f, sample);
    }
    return apply_functional(FunctionalKind::sd, reps);
}

/**
 * Shared driver for both estimators. `draw_one(j, chain_rng)` returns the
 * model the draw came from and the draw itself. Draw (j, b) uses stream
 * rng.split(j, b) and results are reduced in (j, b) order, so the output does
 * not depend on the worker count.
 */
template <typename DrawOne>
StudyResult run_study(const GridSpec& grid, std::span<const StatisticKind> statistics,
                      std::span<const FunctionalKind> functionals, std::size_t draws, const SamplerSpec& sampler,
                      const RandomSource& rng, const StudyOptions& options, DrawOne&& draw_one)
{
    grid.validate();
    require(draws >= 2, "need at least two draws per grid point");
    require(!statistics.empty(), "statistics list is empty");
    require(!functionals.empty(), "functionals list is empty");
    sampler.validate();

    const std::size_t J = grid.points.size();
    const std::size_t S = statistics.size();
    std::vector<double> values(J * draws * S, 0.0);
    std::vector<std::string> errors(J * draws);

    parallel_for(J * draws, options.workers, [&](std::size_t item) {
        const std::size_t j = item / draws;
        const std::size_t b = item % draws;
        try {
            const RandomSource chain = rng.split(j, b);
            const auto [model, y] = draw_one(j, chain);
            for (std::size_t s = 0; s < S; ++s) values[item * S + s] = evaluate_statistic(statistics[s], model, y);
        } catch (const SamplerError& e) {
            errors[item] = e.what();
        } catch (const ResourceLimitError& e) {
            errors[item] = e.what();
        }
    });

    std::vector<std::string> point_error(J);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t b = 0; b < draws && point_error[j].empty(); ++b) {
            if (!errors[j * draws + b].empty()) {
                std::ostringstream msg;
                msg << "sampling failed at " << grid.parameter << "=" << grid.points[j] << ": "
                    << errors[j * draws + b];
                point_error[j] = msg.str();
            }
        }
        if (!point_error[j].empty() && !options.keep_going) throw SamplerError(point_error[j]);
    }

    StudyResult result;
    std::vector<double> column(draws);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t f = 0; f < functionals.size(); ++f) {
            ResponseEstimate est;
            est.grid = grid;
            est.statistic = statistics[s];
            est.functional = functionals[f];
            est.family = options.family_name;
            est.sampler = sampler;
            est.seed = sampler.seed;
            for (std::size_t j = 0; j < J; ++j) {
                ResponsePoint p;
                p.value = grid.points[j];
                if (!point_error[j].empty()) {
                    p.ok = false;
                    p.error = point_error[j];
                    p.estimate = p.raw_estimate = std::nan("");
                    p.mc_se = std::nan("");
                    est.points.push_back(p);
                    continue;
                }
                for (std::size_t b = 0; b < draws; ++b) column[b] = values[(j * draws + b) * S + s];
                p.draws = draws;
                p.estimate = p.raw_estimate = apply_functional(functionals[f], column);
                if (functionals[f] == FunctionalKind::mean) {
                    p.mc_se = apply_functional(FunctionalKind::sd, column) / std::sqrt(static_cast<double>(draws));
                } else {
                    p.mc_se = bootstrap_se(functionals[f], column, options.bootstrap_resamples,
                                           rng.split(bootstrap_stream_tag, j, s, f));
                }
                est.points.push_back(p);
            }
            result.estimates.push_back(std::move(est));
        }
    }
    return result;
}

} // namespace detail

/**
 * Monte Carlo response functions for every (statistic, functional) pair over
 * one shared set of J x B draws. The family maps a grid value to the model
 * with all other parameters held fixed.
 */
inline StudyResult run_response_study(const ModelFamily& family, const GridSpec& grid,
                                      std::span<const StatisticKind> statistics,
                                      std::span<const FunctionalKind> functionals, std::size_t draws,
                                      const SamplerSpec& sampler, const RandomSource& rng,
                                      const StudyOptions& options = {})
{
    grid.validate();
    std::vector<Model> models;
    models.reserve(grid.points.size());
    for (double w : grid.points) models.push_back(family(w));
    return detail::run_study(grid, statistics, functionals, draws, sampler, rng, options,
                             [&](std::size_t j, const RandomSource& chain) {
                                 return std::pair<const Model&, Configuration>(models[j],
                                                                               draw(models[j], sampler, chain));
                             });
}

/**
 * Prior predictive response functions: each draw first samples the remaining
 * coefficients from the prior (stream chain.split(prior tag)) and then one
 * configuration from the model at (w_j, coefficients). The functional is
 * applied to the pooled B statistic values, i.e. to the marginal
 * distribution. A point-mass prior reproduces run_response_study exactly.
 */
inline StudyResult run_prior_predictive_study(const PriorModelFamily& family, const GridSpec& grid,
                                              const PriorSpec& prior, std::span<const StatisticKind> statistics,
                                              std::span<const FunctionalKind> functionals, std::size_t draws,
                                              const SamplerSpec& sampler, const RandomSource& rng,
                                              const StudyOptions& options = {})
{
    prior.validate();
    return detail::run_study(grid, statistics, functionals, draws, sampler, rng, options,
                             [&](std::size_t j, const RandomSource& chain) {
                                 RandomSource prior_rng = chain.split(detail::prior_stream_tag);
                                 std::vector<double> coef(prior.coefficients.size());
                                 for (std::size_t c = 0; c < coef.size(); ++c) {
                                     const auto& pc = prior.coefficients[c];
                                     coef[c] = pc.sd == 0.0 ? pc.mean : pc.mean + pc.sd * prior_rng.normal();
                                 }
                                 Model model = family(grid.points[j], coef);
                                 Configuration y = draw(model, sampler, chain);
                                 return std::pair<Model, Configuration>(std::move(model), std::move(y));
                             });
}

inline ResponseEstimate estimate_response(const ModelFamily& family, const GridSpec& grid,
                                          const StatisticKind& statistic, FunctionalKind functional,
                                          std::size_t draws, const SamplerSpec& sampler, const RandomSource& rng,
                                          const StudyOptions& options = {})
{
    const StatisticKind stats[] = {statistic};
    const FunctionalKind funcs[] = {functional};
    return run_response_study(family, grid, stats, funcs, draws, sampler, rng, options).estimates.front();
}

inline ResponseEstimate estimate_prior_predictive_response(const PriorModelFamily& family, const GridSpec& grid,
                                                           const PriorSpec& prior, const StatisticKind& statistic,
                                                           FunctionalKind functional, std::size_t draws,
                                                           const SamplerSpec& sampler, const RandomSource& rng,
                                                           const StudyOptions& options = {})
{
    const StatisticKind stats[] = {statistic};
    const FunctionalKind funcs[] = {functional};
    return run_prior_predictive_study(family, grid, prior, stats, funcs, draws, sampler, rng, options)
        .estimates.front();
}

/// Centered moving average of the estimate track. Near the ends the window
/// shrinks symmetrically, so lines are reproduced exactly everywhere. Raw
/// values stay in raw_estimate.
inline ResponseEstimate smooth_estimate(const ResponseEstimate& est, std::size_t window)
{
    detail::require(window % 2 == 1, "smoothing window must be odd");
    detail::require(window <= est.points.size(), "smoothing window longer than the grid");
    ResponseEstimate out = est;
    const std::size_t half = window / 2;
    const std::size_t J = est.points.size();
    for (std::size_t j = 0; j < J; ++j) {
        const std::size_t h = std::min({half, j, J - 1 - j});
        double sum = 0.0;
        for (std::size_t m = j - h; m <= j + h; ++m) sum += est.points[m].raw_estimate;
        out.points[j].estimate = sum / static_cast<double>(2 * h + 1);
    }
    return out;
}

} // namespace mrflab
