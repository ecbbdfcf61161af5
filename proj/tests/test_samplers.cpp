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
#include <numbers>
#include <vector>

#include "mrflab/exact.hpp"
#include "mrflab/samplers.hpp"
#include "mrflab/stats.hpp"

using namespace mrflab;

namespace {

std::shared_ptr<const Nug> lattice(std::size_t r, std::size_t c)
{
    return std::make_shared<const Nug>(build_lattice(r, c, NeighborhoodOrder::first));
}

SamplerSpec spec_of(SamplerKind kind, std::size_t sweeps = 30)
{
    SamplerSpec s;
    s.kind = kind;
    s.sweeps = sweeps;
    return s;
}

struct SampleMoments {
    double mean, se;
};

template <typename F>
SampleMoments moments(const std::vector<Configuration>& draws, F&& f)
{
    double s = 0, s2 = 0;
    for (const auto& y : draws) {
        const double v = f(y);
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(draws.size());
    const double mean = s / n;
    const double var = (s2 - n * mean * mean) / (n - 1);
    return {mean, std::sqrt(var / n)};
}

// Expected TV between an N-draw empirical distribution and its source,
// from the normal approximation to each cell.
double noise_tv(const ExactSummary& exact, std::size_t n)
{
    double s = 0;
    for (double p : exact.distribution) s += std::sqrt(p * (1 - p) / (2 * std::numbers::pi * static_cast<double>(n)));
    return s;
}

void expect_moments_match(const Model& m, const std::vector<Configuration>& draws, double z_bound)
{
    const auto exact = enumerate(m);
    for (std::size_t j = 0; j < exact.statistic_means.size(); ++j) {
        const auto mo = moments(draws, [&](const Configuration& y) { return m.sufficient_statistics(y)[j]; });
        EXPECT_LT(std::abs(mo.mean - exact.statistic_means[j]), z_bound * mo.se)
            << m.formulation() << " statistic " << j << " mean " << mo.mean << " exact " << exact.statistic_means[j];
    }
}

} // namespace

TEST(Gibbs, IndependenceAtZeroCoupling)
{
    const Model m(lattice(2, 2), constant_field(0.0), Ising{0.0}, 2);
    const auto draws = sample_batch(m, spec_of(SamplerKind::gibbs, 1), 40000, RandomSource(3));
    const auto exact = enumerate(m, true);
    EXPECT_LT(total_variation(EmpiricalDistribution::from_samples(draws), exact), 2.5 * noise_tv(exact, 40000));
}

TEST(Gibbs, DeterministicForSeed)
{
    const Model m(lattice(4, 4), constant_field(0.1), Autologistic{0.5}, 2);
    const auto a = sample_batch(m, spec_of(SamplerKind::gibbs, 5), 20, RandomSource(9), 1);
    const auto b = sample_batch(m, spec_of(SamplerKind::gibbs, 5), 20, RandomSource(9), 3);
    EXPECT_EQ(a, b);
    const auto c = sample_batch(m, spec_of(SamplerKind::gibbs, 5), 20, RandomSource(10), 1);
    EXPECT_NE(a, c);
    EXPECT_TRUE(sample_batch(m, spec_of(SamplerKind::gibbs), 0, RandomSource(1)).empty());
}

TEST(Gibbs, MomentsMatchExactIsing)
{
    const Model m(lattice(3, 3), constant_field(0.2), Ising{0.4}, 2);
    expect_moments_match(m, sample_batch(m, spec_of(SamplerKind::gibbs), 50000, RandomSource(17)), 3.0);
}

TEST(Gibbs, MomentsMatchExactAutologisticAndPotts)
{
    const Model a(lattice(3, 3), constant_field(-0.1), Autologistic{0.6}, 2);
    expect_moments_match(a, sample_batch(a, spec_of(SamplerKind::gibbs), 50000, RandomSource(18)), 3.0);
    const Model p(lattice(2, 3), ConstantField{{0.3, -0.2}}, Potts{0.7}, 3);
    expect_moments_match(p, sample_batch(p, spec_of(SamplerKind::gibbs), 50000, RandomSource(19)), 3.5);
    const Model o(lattice(2, 3), ConstantField{{0.3, -0.2}}, OrdinalPotts{0.8, 0.3, -0.4}, 3);
    expect_moments_match(o, sample_batch(o, spec_of(SamplerKind::gibbs), 50000, RandomSource(20)), 3.5);
}

TEST(Gibbs, SingleSweepHelperMatchesSampler)
{
    const Model m(lattice(3, 3), constant_field(0.2), Ising{0.4}, 2);
    Configuration a = Configuration::constant(9, 2, 0), b = a;
    RandomSource r1(4), r2(4);
    GibbsSampler g(m);
    for (int s = 0; s < 10; ++s) {
        g.sweep(a, r1);
        gibbs_sweep(m, b, r2);
    }
    EXPECT_EQ(a, b);
}

TEST(SwendsenWang, ZeroCouplingDrawsFromField)
{
    const Model m(lattice(2, 2), constant_field(0.8), Ising{0.0}, 2);
    const auto draws = sample_batch(m, spec_of(SamplerKind::swendsen_wang, 1), 40000, RandomSource(5));
    const auto exact = enumerate(m, true);
    EXPECT_LT(total_variation(EmpiricalDistribution::from_samples(draws), exact), 2.5 * noise_tv(exact, 40000));
}

TEST(SwendsenWang, SpanningClusterRelabeledSymmetrically)
{
    // Bond probability is 1 - e^-50: a constant start keeps one cluster.
    const Model m(lattice(3, 3), constant_field(0.0), Ising{50.0}, 2);
    SamplerSpec s = spec_of(SamplerKind::swendsen_wang, 1);
    s.init = InitKind::all_zero;
    const auto draws = sample_batch(m, s, 20000, RandomSource(6));
    std::size_t ones = 0;
    for (const auto& y : draws) {
        ASSERT_TRUE(y == Configuration::constant(9, 2, 0) || y == Configuration::constant(9, 2, 1));
        ones += y[0];
    }
    EXPECT_NEAR(static_cast<double>(ones) / 20000, 0.5, 4 * std::sqrt(0.25 / 20000));
}

TEST(SwendsenWang, MomentsMatchExact)
{
    const Model m(lattice(3, 3), constant_field(0.2), Ising{0.4}, 2);
    expect_moments_match(m, sample_batch(m, spec_of(SamplerKind::swendsen_wang, 20), 50000, RandomSource(7)), 3.0);
    const Model p(lattice(2, 3), ConstantField{{0.3, -0.2}}, Potts{0.9}, 3);
    expect_moments_match(p, sample_batch(p, spec_of(SamplerKind::swendsen_wang, 20), 50000, RandomSource(8)),
                         3.5);
}

TEST(SwendsenWang, AgreesWithGibbsOnLargerLattice)
{
    const Model m(lattice(8, 8), constant_field(0.0), Ising{0.6}, 2);
    const auto pm = [&](const Configuration& y) { return prop_matches(m.nug(), y); };
    const auto sw = moments(sample_batch(m, spec_of(SamplerKind::swendsen_wang, 50), 4000, RandomSource(1)), pm);
    const auto gb = moments(sample_batch(m, spec_of(SamplerKind::gibbs, 200), 4000, RandomSource(2)), pm);
    EXPECT_LT(std::abs(sw.mean - gb.mean), 3 * std::hypot(sw.se, gb.se));
}

TEST(SwendsenWang, RejectsUnsupportedModels)
{
    EXPECT_THROW(SwendsenWang(Model(lattice(2, 2), constant_field(0.0), Autologistic{0.5}, 2)), UnsupportedError);
    EXPECT_THROW(SwendsenWang(Model(lattice(2, 2), constant_field(0.0), Ising{-0.5}, 2)), UnsupportedError);
}

TEST(Cftp, ZeroCouplingCoalescesAfterOneSweep)
{
    const Model m(lattice(3, 3), constant_field(0.3), Ising{0.0}, 2);
    std::vector<long long> times;
    bool merged = false;
    cftp_sample(m, RandomSource(1), 20, [&](long long t, const Configuration& lo, const Configuration& hi) {
        times.push_back(t);
        merged = lo == hi;
    });
    ASSERT_EQ(times.size(), 1u);
    EXPECT_EQ(times[0], 0);
    EXPECT_TRUE(merged);
}

TEST(Cftp, ExactOnSmallModels)
{
    // Large samples with a bound calibrated to pure sampling noise.
    const std::size_t n = 100000;
    std::vector<double> x;
    for (int i = 0; i < 6; ++i) x.insert(x.end(), {1.0, i / 2.5 - 1.0});
    const std::vector<Model> models = {
        Model(lattice(2, 2), constant_field(0.2), Ising{0.5}, 2),
        Model(lattice(2, 2), constant_field(0.0), Autologistic{0.8}, 2),
        Model(lattice(2, 3), covariate_field(x, 2, {0.3, -0.9}), CenteredAutologistic{1.2}, 2),
        Model(lattice(2, 3), constant_field(-0.4), PhysicsIsing{0.35}, 2),
    };
    SamplerSpec s;
    s.kind = SamplerKind::cftp;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto draws = sample_batch(models[i], s, n, RandomSource(100 + i));
        const auto exact = enumerate(models[i], true);
        EXPECT_LT(total_variation(EmpiricalDistribution::from_samples(draws), exact), 2.0 * noise_tv(exact, n))
            << models[i].formulation();
    }
}

TEST(Cftp, ReportsNonCoalescence)
{
    const Model m(lattice(8, 8), constant_field(0.0), Autologistic{1.6}, 2);
    EXPECT_THROW(cftp_sample(m, RandomSource(1), 0), SamplerError);
}

TEST(Cftp, ApplicabilityAndFallback)
{
    const auto g = lattice(2, 2);
    EXPECT_TRUE(cftp_applicable(Model(g, constant_field(0.0), Autologistic{0.5}, 2)));
    EXPECT_FALSE(cftp_applicable(Model(g, constant_field(0.0), Autologistic{-0.5}, 2)));
    EXPECT_FALSE(cftp_applicable(Model(g, ConstantField{{0.0, 0.0}}, Potts{0.5}, 3)));
    EXPECT_THROW(cftp_sample(Model(g, constant_field(0.0), Ising{-0.2}, 2), RandomSource(1)), UnsupportedError);
    EXPECT_TRUE(BinaryKernel(Model(g, constant_field(0.0), Autologistic{0.5}, 2)).monotone());
    EXPECT_FALSE(BinaryKernel(Model(g, constant_field(0.0), Autologistic{-0.5}, 2)).monotone());

    // Repulsive model: cftp request runs Gibbs instead and is still correct.
    const Model rep(g, constant_field(0.1), Autologistic{-0.7}, 2);
    SamplerSpec s;
    s.kind = SamplerKind::cftp;
    s.sweeps = 20;
    expect_moments_match(rep, sample_batch(rep, s, 30000, RandomSource(2)), 3.5);
}

TEST(Draw, InitKinds)
{
    const Model m(lattice(2, 2), constant_field(0.0), Ising{0.3}, 2);
    RandomSource r(1);
    SamplerSpec s;
    s.init = InitKind::all_one;
    EXPECT_EQ(initial_configuration(m, s, r), Configuration::constant(4, 2, 1));
    s.init = InitKind::given;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.initial = Configuration({1, 0, 0, 1}, 2);
    EXPECT_EQ(initial_configuration(m, s, r), *s.initial);
    s.sweeps = 0;
    s.kind = SamplerKind::gibbs;
    EXPECT_THROW(s.validate(), std::invalid_argument);
}
