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
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mrflab/errors.hpp"
#include "mrflab/model.hpp"
#include "mrflab/parallel.hpp"
#include "mrflab/random.hpp"

namespace mrflab {

enum class SamplerKind { gibbs, swendsen_wang, cftp };
enum class InitKind { all_zero, all_one, uniform_random, given };

inline std::string to_string(SamplerKind k)
{
    switch (k) {
    case SamplerKind::gibbs: return "gibbs";
    case SamplerKind::swendsen_wang: return "swendsen_wang";
    case SamplerKind::cftp: return "cftp";
    }
    return "?";
}

inline std::string to_string(InitKind k)
{
    switch (k) {
    case InitKind::all_zero: return "all_zero";
    case InitKind::all_one: return "all_one";
    case InitKind::uniform_random: return "uniform_random";
    case InitKind::given: return "given";
    }
    return "?";
}

struct SamplerSpec {
    SamplerKind kind = SamplerKind::swendsen_wang;
    std::size_t sweeps = 400;  // iterations per independent chain (gibbs, swendsen_wang)
    InitKind init = InitKind::uniform_random;
    std::uint64_t seed = 0;
    std::size_t max_epoch = 20; // cftp tries T = 1, 2, 4, ..., 2^max_epoch
    std::optional<Configuration> initial; // used when init == given

    void validate() const
    {
        if (kind != SamplerKind::cftp) {
            detail::require(sweeps >= 1, "sampler sweeps must be at least 1");
        }
        if (init == InitKind::given) {
            detail::require(initial.has_value(), "init 'given' requires an initial configuration");
        }
    }
};

// ---------------------------------------------------------------------------
// Binary single-site kernel
// ---------------------------------------------------------------------------

/**
 * P(y_i = 1 | neighbors) for binary models, tabulated by the number of
 * neighbors in state 1. In a pairwise binary model the conditional log-odds
 * depend on the neighborhood only through that count.
 */
class BinaryKernel {
public:
    explicit BinaryKernel(const Model& model) : nug_(&model.nug())
    {
        detail::require(model.binary(), "binary kernel requires k=2");
        const double c1 = model.pair_potential(1, 1) - model.pair_potential(0, 1);
        const double c0 = model.pair_potential(1, 0) - model.pair_potential(0, 0);
        monotone_ = c1 >= c0;
        const std::size_t n = model.n();
        offsets_.resize(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + nug_->degree(static_cast<Vertex>(i)) + 1;
        p1_.resize(offsets_[n]);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t d = offsets_[i + 1] - offsets_[i] - 1;
            const double base = model.singleton_potential(i, 1) - model.singleton_potential(i, 0);
            for (std::size_t ones = 0; ones <= d; ++ones) {
                const double logit = base + static_cast<double>(ones) * c1 + static_cast<double>(d - ones) * c0;
                p1_[offsets_[i] + ones] = logistic(logit);
            }
        }
    }

    /// Whether P(y_i = 1 | .) is nondecreasing in every neighbor (supermodular pair potential).
    bool monotone() const noexcept { return monotone_; }

    double prob_one(const Configuration& y, Vertex i) const noexcept
    {
        std::size_t ones = 0;
        for (Vertex j : nug_->neighbors_unchecked(i)) ones += y[j];
        return p1_[offsets_[i] + ones];
    }

private:
    const Nug* nug_;
    bool monotone_ = false;
    std::vector<std::size_t> offsets_;
    std::vector<double> p1_;
};

namespace detail {

inline State sample_categorical(std::span<const double> probs, double u) noexcept
{
    double cum = 0.0;
    for (std::size_t l = 0; l + 1 < probs.size(); ++l) {
        cum += probs[l];
        if (u < cum) return static_cast<State>(l);
    }
    return static_cast<State>(probs.size() - 1);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Gibbs
// ---------------------------------------------------------------------------

/// Systematic raster-scan Gibbs sampler; one uniform per site per sweep.
class GibbsSampler {
public:
    explicit GibbsSampler(const Model& model) : model_(&model)
    {
        if (model.binary()) kernel_.emplace(model);
        weights_.resize(static_cast<std::size_t>(model.k()));
    }

    void sweep(Configuration& y, RandomSource& rng)
    {
        const auto n = static_cast<Vertex>(model_->n());
        if (kernel_) {
            for (Vertex i = 0; i < n; ++i) {
                y[i] = rng.uniform() < kernel_->prob_one(y, i) ? 1 : 0;
            }
            return;
        }
        for (Vertex i = 0; i < n; ++i) {
            model_->local_log_weights(y, i, weights_);
            softmax_inplace(weights_);
            y[i] = detail::sample_categorical(weights_, rng.uniform());
        }
    }

private:
    const Model* model_;
    std::optional<BinaryKernel> kernel_;
    std::vector<double> weights_;
};

inline void gibbs_sweep(const Model& model, Configuration& y, RandomSource& rng)
{
    model.check(y);
    GibbsSampler(model).sweep(y, rng);
}

// ---------------------------------------------------------------------------
// Swendsen-Wang
// ---------------------------------------------------------------------------

/**
 * Swendsen-Wang cluster update for the symmetric-match formulations (Ising
 * and standard Potts, psi >= 0).
 *
 * Matching neighbors are bonded with probability 1 - exp(-psi). Each
 * connected cluster C then receives label l with probability proportional to
 * exp(sum_{i in C} f_i(l)), the field-tilted conditional, so the update is
 * exact with an external field too; it just mixes more slowly as the field
 * grows.
 */
class SwendsenWang {
public:
    explicit SwendsenWang(const Model& model) : model_(&model)
    {
        const auto& spec = model.pairwise();
        if (!std::holds_alternative<Ising>(spec) && !std::holds_alternative<Potts>(spec)) {
            throw UnsupportedError("Swendsen-Wang requires the Ising or Potts formulation, got " +
                                   model.formulation());
        }
        const double psi = dependence_parameter(spec);
        if (!(psi >= 0.0)) {
            throw UnsupportedError("Swendsen-Wang requires psi >= 0");
        }
        bond_probability_ = -std::expm1(-psi);
        const std::size_t n = model.n();
        parent_.resize(n);
        size_.resize(n);
        cluster_of_.resize(n);
        roots_.resize(n);
        root_cluster_.resize(n);
        const auto k = static_cast<std::size_t>(model.k());
        cluster_weights_.resize(n * k);
        labels_.resize(n);
        probs_.resize(k);
    }

    void step(Configuration& y, RandomSource& rng)
    {
        const std::size_t n = model_->n();
        const auto k = static_cast<std::size_t>(model_->k());
        std::iota(parent_.begin(), parent_.end(), Vertex{0});
        std::fill(size_.begin(), size_.end(), 1u);

        if (bond_probability_ > 0.0) {
            for (const auto& e : model_->nug().edges()) {
                if (y[e.a] == y[e.b] && rng.uniform() < bond_probability_) unite(e.a, e.b);
            }
        }

        constexpr Vertex unassigned = ~Vertex{0};
        for (std::size_t i = 0; i < n; ++i) roots_[i] = find(static_cast<Vertex>(i));
        std::fill(root_cluster_.begin(), root_cluster_.end(), unassigned);
        std::size_t clusters = 0;
        for (std::size_t i = 0; i < n; ++i) {
            Vertex& id = root_cluster_[roots_[i]];
            if (id == unassigned) {
                id = static_cast<Vertex>(clusters);
                std::fill_n(cluster_weights_.begin() + static_cast<std::ptrdiff_t>(clusters * k), k, 0.0);
                ++clusters;
            }
            cluster_of_[i] = id;
            const auto row = model_->singleton_table().subspan(i * k, k);
            double* w = cluster_weights_.data() + static_cast<std::size_t>(id) * k;
            for (std::size_t l = 0; l < k; ++l) w[l] += row[l];
        }
        for (std::size_t c = 0; c < clusters; ++c) {
            std::copy_n(cluster_weights_.begin() + static_cast<std::ptrdiff_t>(c * k), k, probs_.begin());
            softmax_inplace(probs_);
            labels_[c] = detail::sample_categorical(probs_, rng.uniform());
        }
        for (std::size_t i = 0; i < n; ++i) y[i] = labels_[cluster_of_[i]];
    }

private:
    Vertex find(Vertex v) noexcept
    {
        while (parent_[v] != v) {
            parent_[v] = parent_[parent_[v]];
            v = parent_[v];
        }
        return v;
    }

    void unite(Vertex a, Vertex b) noexcept
    {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
    }

    const Model* model_;
    double bond_probability_ = 0.0;
    std::vector<Vertex> parent_;
    std::vector<Vertex> size_;
    std::vector<Vertex> cluster_of_;
    std::vector<Vertex> roots_;
    std::vector<Vertex> root_cluster_;
    std::vector<double> cluster_weights_;
    std::vector<State> labels_;
    std::vector<double> probs_;
};

inline void swendsen_wang_step(const Model& model, Configuration& y, RandomSource& rng)
{
    model.check(y);
    SwendsenWang(model).step(y, rng);
}

// ---------------------------------------------------------------------------
// Coupling from the past
// ---------------------------------------------------------------------------

/// Observer hook for CFTP: called after every sweep with (time, bottom, top).
using CftpObserver = std::function<void(long long, const Configuration&, const Configuration&)>;

/// True when monotone CFTP applies: binary formulation with an attractive
/// (supermodular) pairwise potential.
inline bool cftp_applicable(const Model& model)
{
    const auto& spec = model.pairwise();
    const bool formulation_ok = std::holds_alternative<Ising>(spec) || std::holds_alternative<PhysicsIsing>(spec) ||
                                std::holds_alternative<Autologistic>(spec) ||
                                std::holds_alternative<CenteredAutologistic>(spec);
    return formulation_ok && model.binary() && dependence_parameter(spec) >= 0.0 && BinaryKernel(model).monotone();
}

/**
 * Monotone coupling from the past (Propp-Wilson).
 *
 * The all-zero and all-one chains start at time -T and are driven by the
 * same uniform for every (site, time) pair. Uniforms for time t come from the
 * stream rng.split(t), so doubling T replays the exact randomness already used
 * for the later times. Returns the common state once the chains agree at
 * time 0; throws SamplerError naming the last T if T = 2^max_epoch does not
 * coalesce.
 */
inline Configuration cftp_sample(const Model& model, const RandomSource& rng, std::size_t max_epoch = 20,
                                 const CftpObserver& observer = {})
{
    const auto& spec = model.pairwise();
    if (!(std::holds_alternative<Ising>(spec) || std::holds_alternative<PhysicsIsing>(spec) ||
          std::holds_alternative<Autologistic>(spec) || std::holds_alternative<CenteredAutologistic>(spec))) {
        throw UnsupportedError("CFTP requires a binary Ising-type or autologistic formulation, got " +
                               model.formulation());
    }
    if (!(dependence_parameter(spec) >= 0.0)) {
        throw UnsupportedError("CFTP requires an attractive model (psi >= 0)");
    }
    const BinaryKernel kernel(model);
    if (!kernel.monotone()) {
        throw UnsupportedError("full conditionals are not monotone; CFTP does not apply");
    }
    const auto n = static_cast<Vertex>(model.n());
    const RandomSource time_root = rng.split(0x43465450ULL); // "CFTP"

    long long horizon = 1;
    for (std::size_t epoch = 0; epoch <= max_epoch; ++epoch, horizon *= 2) {
        Configuration bottom = Configuration::constant(n, 2, 0);
        Configuration top = Configuration::constant(n, 2, 1);
        bool merged = false;
        for (long long t = -horizon; t < 0; ++t) {
            RandomSource u = time_root.split(static_cast<std::uint64_t>(-t));
            if (merged) {
                for (Vertex i = 0; i < n; ++i) bottom[i] = u.uniform() < kernel.prob_one(bottom, i) ? 1 : 0;
            } else {
                for (Vertex i = 0; i < n; ++i) {
                    const double v = u.uniform();
                    bottom[i] = v < kernel.prob_one(bottom, i) ? 1 : 0;
                    top[i] = v < kernel.prob_one(top, i) ? 1 : 0;
                }
                merged = bottom == top;
            }
            if (observer) observer(t + 1, bottom, merged ? bottom : top);
        }
        if (merged) return bottom;
    }
    throw SamplerError("CFTP did not coalesce by T=" + std::to_string(horizon / 2) + " (max_epoch " +
                       std::to_string(max_epoch) + ")");
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

/// Initial state drawn site-wise from the field-only (psi = 0) distribution.
inline Configuration field_only_draw(const Model& model, RandomSource& rng)
{
    const std::size_t n = model.n();
    const auto k = static_cast<std::size_t>(model.k());
    Configuration y = Configuration::constant(n, model.k(), 0);
    std::vector<double> w(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < k; ++l) w[l] = model.singleton_potential(i, static_cast<int>(l));
        if (model.centered()) {
            w[0] = 0.0;
            w[1] = field_log_odds(model.field(), i);
        }
        softmax_inplace(w);
        y[i] = detail::sample_categorical(w, rng.uniform());
    }
    return y;
}

inline Configuration initial_configuration(const Model& model, const SamplerSpec& spec, RandomSource& rng)
{
    switch (spec.init) {
    case InitKind::all_zero: return Configuration::constant(model.n(), model.k(), 0);
    case InitKind::all_one: return Configuration::constant(model.n(), model.k(), 1);
    case InitKind::given: model.check(*spec.initial); return *spec.initial;
    case InitKind::uniform_random: break;
    }
    return field_only_draw(model, rng);
}

/**
 * One independent draw. Approximate kinds start a fresh chain from the
 * configured init and return the state after `sweeps` iterations; cftp
 * returns an exact draw. A cftp request on a model whose full conditionals
 * are not monotone falls back to Gibbs with a warning.
 */
inline Configuration draw(const Model& model, const SamplerSpec& spec, const RandomSource& chain)
{
    spec.validate();
    if (spec.kind == SamplerKind::cftp) {
        if (cftp_applicable(model)) return cftp_sample(model, chain, spec.max_epoch);
        std::clog << "mrflab: warning: CFTP not applicable to " << model.formulation()
                  << " at these parameters; using " << spec.sweeps << " Gibbs sweeps\n";
    }
    RandomSource init_rng = chain.split(1);
    RandomSource step_rng = chain.split(2);
    Configuration y = initial_configuration(model, spec, init_rng);
    if (spec.kind == SamplerKind::swendsen_wang) {
        SwendsenWang sw(model);
        for (std::size_t s = 0; s < spec.sweeps; ++s) sw.step(y, step_rng);
    } else {
        GibbsSampler gibbs(model);
        for (std::size_t s = 0; s < spec.sweeps; ++s) gibbs.sweep(y, step_rng);
    }
    return y;
}

/// `count` independent draws; draw b uses stream rng.split(b), so the batch
/// is identical for any worker count.
inline std::vector<Configuration> sample_batch(const Model& model, const SamplerSpec& spec, std::size_t count,
                                               const RandomSource& rng, unsigned workers = 1)
{
    spec.validate();
    std::vector<Configuration> out(count);
    parallel_for(count, workers, [&](std::size_t b) { out[b] = draw(model, spec, rng.split(b)); });
    return out;
}

} // namespace mrflab
