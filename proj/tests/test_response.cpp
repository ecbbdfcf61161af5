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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mrflab/exact.hpp"
#include "mrflab/response.hpp"

using namespace mrflab;

namespace {

std::shared_ptr<const Nug> lattice(std::size_t r, std::size_t c)
{
    return std::make_shared<const Nug>(build_lattice(r, c, NeighborhoodOrder::first));
}

SamplerSpec gibbs(std::size_t sweeps = 30)
{
    SamplerSpec s;
    s.kind = SamplerKind::gibbs;
    s.sweeps = sweeps;
    return s;
}

const StatisticKind prop_black_kind = parse_statistic("prop_black");

} // namespace

TEST(Functional, SampleValues)
{
    const std::vector<double> v = {1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(apply_functional(FunctionalKind::mean, v), 2.5);
    EXPECT_DOUBLE_EQ(apply_functional(FunctionalKind::variance, v), 5.0 / 3);
    EXPECT_DOUBLE_EQ(apply_functional(FunctionalKind::sd, v), std::sqrt(5.0 / 3));
    EXPECT_THROW(apply_functional(FunctionalKind::sd, std::vector<double>{1.0}), std::invalid_argument);
    EXPECT_EQ(parse_functional("sd"), FunctionalKind::sd);
    EXPECT_THROW(parse_functional("median"), std::invalid_argument);
}

TEST(Grid, RangeAndValidation)
{
    const auto g = GridSpec::range("psi", 0.0, 1.2, 0.04);
    ASSERT_EQ(g.points.size(), 31u);
    EXPECT_DOUBLE_EQ(g.points[25], 25 * 0.04);
    EXPECT_EQ(GridSpec::range("psi", 0.0, 1.7, 0.03).points.size(), 57u);
    EXPECT_THROW((GridSpec{"psi", {0.2, 0.1}}.validate()), std::invalid_argument);
    EXPECT_THROW((GridSpec{"psi", {}}.validate()), std::invalid_argument);
}

TEST(Response, MeanMatchesExactAtEachGridPoint)
{
    const auto g = lattice(3, 3);
    const GridSpec grid{"psi", {0.0, 0.4, 0.8}};
    const ModelFamily family = [&](double psi) { return Model(g, constant_field(0.2), Ising{psi}, 2); };
    const StatisticKind stats[] = {parse_statistic("raw_T1"), parse_statistic("raw_T2")};
    const FunctionalKind funcs[] = {FunctionalKind::mean};
    const auto res = run_response_study(family, grid, stats, funcs, 20000, gibbs(), RandomSource(31));
    for (std::size_t s = 0; s < 2; ++s) {
        const auto& est = res.get(stats[s], FunctionalKind::mean);
        for (std::size_t j = 0; j < grid.points.size(); ++j) {
            const double exact = enumerate(family(grid.points[j])).statistic_means[s];
            EXPECT_LT(std::abs(est.points[j].estimate - exact), 3 * est.points[j].mc_se)
                << to_string(stats[s]) << " at psi=" << grid.points[j];
        }
    }
}

TEST(Response, VarianceMatchesExactWithinBootstrapError)
{
    const auto g = lattice(3, 3);
    const GridSpec grid{"psi", {0.3, 0.9}};
    const ModelFamily family = [&](double psi) { return Model(g, constant_field(0.0), Ising{psi}, 2); };
    const auto est = estimate_response(family, grid, prop_black_kind, FunctionalKind::variance, 10000, gibbs(),
                                       RandomSource(32));
    for (std::size_t j = 0; j < grid.points.size(); ++j) {
        const double exact =
            exact_statistic_moments(family(grid.points[j]), [](const Configuration& y) { return prop_black(y); })
                .variance;
        EXPECT_GT(est.points[j].mc_se, 0.0);
        EXPECT_LT(std::abs(est.points[j].estimate - exact), 3.5 * est.points[j].mc_se);
    }
}

TEST(Response, StandardErrorOfMeanIsSdOverRootB)
{
    const auto g = lattice(3, 3);
    const ModelFamily family = [&](double psi) { return Model(g, constant_field(0.0), Ising{psi}, 2); };
    const StatisticKind stats[] = {prop_black_kind};
    const FunctionalKind funcs[] = {FunctionalKind::mean, FunctionalKind::sd};
    const auto res = run_response_study(family, GridSpec{"psi", {0.5}}, stats, funcs, 400, gibbs(5), RandomSource(1));
    const auto& mean = res.get(prop_black_kind, FunctionalKind::mean).points[0];
    const auto& sd = res.get(prop_black_kind, FunctionalKind::sd).points[0];
    EXPECT_NEAR(mean.mc_se, sd.estimate / 20.0, 1e-15);
    EXPECT_EQ(mean.draws, 400u);
}

TEST(Response, IndependentHalfAtZeroField)
{
    const auto g = lattice(4, 4);
    const ModelFamily family = [&](double psi) { return Model(g, constant_field(0.0), Ising{psi}, 2); };
    const auto est = estimate_response(family, GridSpec{"psi", {0.0}}, prop_black_kind, FunctionalKind::mean, 2000,
                                       gibbs(1), RandomSource(2));
    EXPECT_LT(std::abs(est.points[0].estimate - 0.5), 3 * est.points[0].mc_se);
}

TEST(Response, IdenticalForAnyWorkerCount)
{
    const auto g = lattice(5, 5);
    const ModelFamily family = [&](double psi) { return Model(g, constant_field(0.1), Ising{psi}, 2); };
    const StatisticKind stats[] = {prop_black_kind, parse_statistic("prop_matches")};
    const FunctionalKind funcs[] = {FunctionalKind::mean, FunctionalKind::sd};
    SamplerSpec sw;
    sw.sweeps = 10;
    StudyOptions one, many;
    many.workers = 4;
    const auto a = run_response_study(family, GridSpec{"psi", {0.2, 0.9}}, stats, funcs, 50, sw, RandomSource(8), one);
    const auto b = run_response_study(family, GridSpec{"psi", {0.2, 0.9}}, stats, funcs, 50, sw, RandomSource(8), many);
    for (std::size_t e = 0; e < a.estimates.size(); ++e) {
        for (std::size_t j = 0; j < 2; ++j) {
            EXPECT_EQ(a.estimates[e].points[j].estimate, b.estimates[e].points[j].estimate);
            EXPECT_EQ(a.estimates[e].points[j].mc_se, b.estimates[e].points[j].mc_se);
        }
    }
}

TEST(Response, RejectsEmptyLists)
{
    const auto g = lattice(2, 2);
    const ModelFamily family = [&](double psi) { return Model(g, constant_field(0.0), Ising{psi}, 2); };
    const FunctionalKind funcs[] = {FunctionalKind::mean};
    EXPECT_THROW(run_response_study(family, GridSpec{"psi", {0.1}}, {}, funcs, 10, gibbs(), RandomSource(1)),
                 std::invalid_argument);
}

TEST(PriorPredictive, SymmetricPriorCentersPropBlack)
{
    const auto g = lattice(4, 4);
    const PriorModelFamily family = [&](double psi, std::span<const double> c) {
        return Model(g, constant_field(c[0]), Autologistic{psi}, 2);
    };
    const PriorSpec prior{{{0.0, 1.0}}};
    const auto est = estimate_prior_predictive_response(family, GridSpec{"psi", {0.0}}, prior, prop_black_kind,
                                                        FunctionalKind::mean, 4000, gibbs(1), RandomSource(3));
    EXPECT_LT(std::abs(est.points[0].estimate - 0.5), 3 * est.points[0].mc_se);
}

TEST(PriorPredictive, PriorSpreadsTheMarginal)
{
    // With alpha ~ N(0, 1) and psi = 0 the sd of prop_black exceeds the fixed-alpha value.
    const auto g = lattice(4, 4);
    const PriorModelFamily family = [&](double psi, std::span<const double> c) {
        return Model(g, constant_field(c[0]), Ising{psi}, 2);
    };
    const auto wide = estimate_prior_predictive_response(family, GridSpec{"psi", {0.0}}, PriorSpec{{{0.0, 1.0}}},
                                                         prop_black_kind, FunctionalKind::sd, 2000, gibbs(1),
                                                         RandomSource(4));
    EXPECT_GT(wide.points[0].estimate, 0.2); // var = E[p(1-p)]/16 + var(p), p = logistic(alpha)
    EXPECT_LT(wide.points[0].estimate, 0.3);
}

TEST(PriorPredictive, PointMassReproducesPlainResponse)
{
    const auto g = lattice(2, 3);
    const GridSpec grid{"psi", {0.0, 0.5, 1.0}};
    const PriorModelFamily prior_family = [&](double psi, std::span<const double> c) {
        return Model(g, constant_field(c[0]), Autologistic{psi}, 2);
    };
    const ModelFamily family = [&](double psi) { return Model(g, constant_field(-0.3), Autologistic{psi}, 2); };
    SamplerSpec cftp;
    cftp.kind = SamplerKind::cftp;
    const auto a = estimate_prior_predictive_response(prior_family, grid, PriorSpec{{{-0.3, 0.0}}}, prop_black_kind,
                                                      FunctionalKind::sd, 100, cftp, RandomSource(5));
    const auto b = estimate_response(family, grid, prop_black_kind, FunctionalKind::sd, 100, cftp, RandomSource(5));
    for (std::size_t j = 0; j < grid.points.size(); ++j) {
        EXPECT_EQ(a.points[j].estimate, b.points[j].estimate);
        EXPECT_EQ(a.points[j].mc_se, b.points[j].mc_se);
    }
}

TEST(PriorPredictive, RejectsNegativeSd)
{
    EXPECT_THROW((PriorSpec{{{0.0, -1.0}}}.validate()), std::invalid_argument);
}

TEST(Failures, NonCoalescenceNamesGridPoint)
{
    const auto g = lattice(8, 8);
    const ModelFamily family = [&](double psi) { return Model(g, constant_field(0.0), Autologistic{psi}, 2); };
    SamplerSpec cftp;
    cftp.kind = SamplerKind::cftp;
    cftp.max_epoch = 1;
    const GridSpec grid{"psi", {0.0, 1.6}};
    try {
        estimate_response(family, grid, prop_black_kind, FunctionalKind::mean, 5, cftp, RandomSource(6));
        FAIL() << "expected a sampler failure";
    } catch (const SamplerError& e) {
        EXPECT_NE(std::string(e.what()).find("psi=1.6"), std::string::npos) << e.what();
    }
    StudyOptions keep;
    keep.keep_going = true;
    const auto est =
        estimate_response(family, grid, prop_black_kind, FunctionalKind::mean, 5, cftp, RandomSource(6), keep);
    EXPECT_TRUE(est.points[0].ok);
    EXPECT_FALSE(est.points[1].ok);
}

TEST(Interpolation, LinearBetweenGridPoints)
{
    ResponseEstimate est;
    for (double w : {0.0, 0.5, 1.0}) {
        ResponsePoint p;
        p.value = w;
        p.estimate = p.raw_estimate = 2 * w + 1;
        est.points.push_back(p);
    }
    EXPECT_DOUBLE_EQ(est.at(0.8), 2.6);
    EXPECT_DOUBLE_EQ(est.at(0.5), 2.0);
    EXPECT_DOUBLE_EQ(est.nearest(0.7).value, 0.5);
    EXPECT_THROW(est.at(1.5), std::invalid_argument);
}

TEST(Smoothing, PreservesConstantsAndLines)
{
    ResponseEstimate est;
    const std::vector<double> noisy = {0.3, 0.9, 0.1, 0.5, 0.7};
    for (std::size_t j = 0; j < 5; ++j) {
        ResponsePoint p;
        p.value = static_cast<double>(j);
        p.estimate = p.raw_estimate = noisy[j];
        est.points.push_back(p);
    }
    const auto ident = smooth_estimate(est, 1);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(ident.points[j].estimate, noisy[j]);
    const auto s3 = smooth_estimate(est, 3);
    EXPECT_NEAR(s3.points[2].estimate, 0.5, 1e-15);
    EXPECT_EQ(s3.points[2].raw_estimate, 0.1);

    for (std::size_t j = 0; j < 5; ++j) est.points[j].estimate = est.points[j].raw_estimate = 3.0 - 0.5 * j;
    const auto line = smooth_estimate(est, 5);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(line.points[j].estimate, 3.0 - 0.5 * j, 1e-15);
    for (std::size_t j = 0; j < 5; ++j) est.points[j].estimate = est.points[j].raw_estimate = 0.25;
    for (const auto& p : smooth_estimate(est, 3).points) EXPECT_DOUBLE_EQ(p.estimate, 0.25);
    EXPECT_THROW(smooth_estimate(est, 2), std::invalid_argument);
    EXPECT_THROW(smooth_estimate(est, 7), std::invalid_argument);
}
