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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "mrflab/errors.hpp"
#include "mrflab/graph.hpp"

namespace mrflab {

using State = std::uint8_t;

inline double logistic(double x) noexcept
{
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Normalizes log-weights in place into probabilities.
inline void softmax_inplace(std::span<double> w) noexcept
{
    const double m = *std::max_element(w.begin(), w.end());
    double total = 0.0;
    for (auto& v : w) {
        v = std::exp(v - m);
        total += v;
    }
    for (auto& v : w) {
        v /= total;
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Assignment of a category in {0..k-1} to every vertex. Spin-coded
/// formulations read state 0 as -1 and state 1 as +1.
struct Configuration {
    std::vector<State> states;
    int k = 2;

    Configuration() = default;
    Configuration(std::vector<State> s, int categories) : states(std::move(s)), k(categories) {}

    static Configuration constant(std::size_t n, int k, State value)
    {
        return Configuration(std::vector<State>(n, value), k);
    }

    std::size_t size() const noexcept { return states.size(); }
    State operator[](std::size_t i) const noexcept { return states[i]; }
    State& operator[](std::size_t i) noexcept { return states[i]; }

    /// y -> 1 - y for binary configurations.
    Configuration complement() const
    {
        detail::require(k == 2, "complement is defined for binary configurations only");
        Configuration out = *this;
        for (auto& s : out.states) {
            s = static_cast<State>(1 - s);
        }
        return out;
    }

    friend bool operator==(const Configuration&, const Configuration&) = default;
};

// ---------------------------------------------------------------------------
// External fields
// ---------------------------------------------------------------------------

/// Same singleton potential at every site: alpha[l-1] for class l >= 1.
struct ConstantField {
    std::vector<double> alpha;
};

/// alpha_i(l) = x_i' beta_l, with class 0 as the reference (beta_0 = 0).
struct CovariateField {
    std::size_t p = 0;
    std::vector<double> x;                 // n x p, row-major
    std::vector<std::vector<double>> beta; // one length-p vector per class 1..k-1

    double linear_predictor(std::size_t i, int l) const noexcept
    {
        if (l == 0) return 0.0;
        const auto& b = beta[static_cast<std::size_t>(l - 1)];
        double s = 0.0;
        for (std::size_t c = 0; c < p; ++c) {
            s += x[i * p + c] * b[c];
        }
        return s;
    }
};

/// Arbitrary per-site, per-class singleton potentials (n x k, row-major).
struct SiteTableField {
    std::size_t k = 0;
    std::vector<double> table;
};

using ExternalField = std::variant<ConstantField, CovariateField, SiteTableField>;

inline ExternalField constant_field(double alpha) { return ConstantField{{alpha}}; }

inline ExternalField covariate_field(std::vector<double> x, std::size_t p, std::vector<double> beta)
{
    return CovariateField{p, std::move(x), {std::move(beta)}};
}

/// Linear predictor (or raw table entry) for site i and class l.
inline double field_value(const ExternalField& field, std::size_t i, int l)
{
    return std::visit(
        [&](const auto& f) -> double {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, ConstantField>) {
                return l == 0 ? 0.0 : f.alpha[static_cast<std::size_t>(l - 1)];
            } else if constexpr (std::is_same_v<F, CovariateField>) {
                return f.linear_predictor(i, l);
            } else {
                return f.table[i * f.k + static_cast<std::size_t>(l)];
            }
        },
        field);
}

/// Log-odds of class 1 over class 0 at site i under the field alone.
inline double field_log_odds(const ExternalField& field, std::size_t i)
{
    return std::visit(
        [&](const auto& f) -> double {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, ConstantField>) {
                if (f.alpha.size() != 1) throw UnsupportedError("field is not binary");
                return f.alpha[0];
            } else if constexpr (std::is_same_v<F, CovariateField>) {
                if (f.beta.size() != 1) throw UnsupportedError("field is not binary");
                return f.linear_predictor(i, 1);
            } else {
                if (f.k != 2) {
                    throw UnsupportedError("independence probability requires a binary field, table has k=" +
                                           std::to_string(f.k));
                }
                return f.table[i * 2 + 1] - f.table[i * 2];
            }
        },
        field);
}

/// P(y_i = 1) under the independence (psi = 0) model: logistic(alpha_i).
inline double independence_probability(const ExternalField& field, std::size_t i)
{
    return logistic(field_log_odds(field, i));
}

/// Planar gradient x_i = (r(i) + c(i) - n_r - 1) / (n_r - 1) on an n_r x n_r
/// lattice, row-major with 1-based row/column indices. Ranges over [-1, 1].
inline std::vector<double> build_gradient_covariate(std::size_t n_r)
{
    detail::require(n_r >= 2, "gradient covariate needs n_r >= 2");
    std::vector<double> x(n_r * n_r);
    const double denom = static_cast<double>(n_r - 1);
    for (std::size_t r = 1; r <= n_r; ++r) {
        for (std::size_t c = 1; c <= n_r; ++c) {
            const auto num = static_cast<double>(r + c) - static_cast<double>(n_r) - 1.0;
            x[(r - 1) * n_r + (c - 1)] = num / denom;
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Pairwise specifications
// ---------------------------------------------------------------------------

struct PhysicsIsing { double psi = 0.0; };          // spins, g = y_i y_j
struct Autologistic { double psi = 0.0; };          // 0/1, g = y_i y_j
struct CenteredAutologistic { double psi = 0.0; };  // autologistic with centered autocovariate
struct Ising { double psi = 0.0; };                 // 0/1, g = I(y_i = y_j)
struct Potts { double psi = 0.0; };                 // k states, g = I(y_i = y_j)
struct FlexiblePotts { std::vector<double> psi; };  // symmetric k x k
struct OrdinalPotts { double psi1 = 0.0, psi2 = 0.0, psi3 = 0.0; };

using PairwiseSpec = std::variant<PhysicsIsing, Autologistic, CenteredAutologistic, Ising, Potts,
                                  FlexiblePotts, OrdinalPotts>;

inline std::string formulation_name(const PairwiseSpec& spec)
{
    constexpr const char* names[] = {"physics_ising", "autologistic", "centered_autologistic",
                                     "ising", "potts", "flexible_potts", "ordinal_potts"};
    return names[spec.index()];
}

inline bool is_binary_formulation(const PairwiseSpec& spec)
{
    return std::holds_alternative<PhysicsIsing>(spec) || std::holds_alternative<Autologistic>(spec) ||
           std::holds_alternative<CenteredAutologistic>(spec) || std::holds_alternative<Ising>(spec);
}

/// The single dependence parameter of formulations that have one.
inline double dependence_parameter(const PairwiseSpec& spec)
{
    return std::visit(
        [](const auto& s) -> double {
            if constexpr (requires { s.psi + 0.0; }) {
                return s.psi;
            } else {
                throw UnsupportedError("formulation has no scalar dependence parameter");
            }
        },
        spec);
}

inline PairwiseSpec with_dependence_parameter(PairwiseSpec spec, double psi)
{
    std::visit(
        [psi](auto& s) {
            if constexpr (requires { s.psi = psi; }) {
                s.psi = psi;
            } else {
                throw UnsupportedError("formulation has no scalar dependence parameter");
            }
        },
        spec);
    return spec;
}

/**
 * Pairwise clique function g(y_i, y_j).
 *
 * Spin-coded physics-Ising maps 0/1 to -1/+1 before multiplying. For the
 * flexible and ordinal Potts variants g already carries the parameters, so
 * the returned value is the potential itself.
 */
inline double pairwise_g(const PairwiseSpec& spec, int k, State yi, State yj)
{
    detail::require(yi < k && yj < k, "state out of range for k=" + std::to_string(k));
    return std::visit(
        [&](const auto& s) -> double {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, PhysicsIsing>) {
                return static_cast<double>((2 * yi - 1) * (2 * yj - 1));
            } else if constexpr (std::is_same_v<S, Autologistic> ||
                                 std::is_same_v<S, CenteredAutologistic>) {
                return static_cast<double>(yi * yj);
            } else if constexpr (std::is_same_v<S, Ising> || std::is_same_v<S, Potts>) {
                return yi == yj ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<S, FlexiblePotts>) {
                return s.psi[static_cast<std::size_t>(yi) * static_cast<std::size_t>(k) + yj];
            } else {
                const int d = std::abs(static_cast<int>(yi) - static_cast<int>(yj));
                return d == 0 ? s.psi1 : (d == 1 ? s.psi2 : s.psi3);
            }
        },
        spec);
}

/// Pairwise clique potential f(a, b) = psi * g(a, b) (or g itself when g carries the parameters).
inline double pair_potential(const PairwiseSpec& spec, int k, State a, State b)
{
    const double g = pairwise_g(spec, k, a, b);
    if (std::holds_alternative<FlexiblePotts>(spec) || std::holds_alternative<OrdinalPotts>(spec)) {
        return g;
    }
    return dependence_parameter(spec) * g;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/**
 * A pairwise MRF on a NUG: external field, pairwise specification and the
 * number of categories.
 *
 * On construction the model tabulates every singleton potential (n x k,
 * including the spin coding of physics-Ising and the centered-autologistic
 * adjustment) and the k x k pairwise potential. All evaluation routes go
 * through those tables, so the model is a read-only value that can be shared
 * between threads.
 */
class Model {
public:
    Model(std::shared_ptr<const Nug> nug, ExternalField field, PairwiseSpec pairwise, int k)
        : nug_(std::move(nug)), field_(std::move(field)), pairwise_(std::move(pairwise)), k_(k)
    {
        detail::require(nug_ != nullptr, "model requires a graph");
        validate();
        tabulate();
    }

    Model(const Nug& nug, ExternalField field, PairwiseSpec pairwise, int k)
        : Model(std::make_shared<const Nug>(nug), std::move(field), std::move(pairwise), k)
    {}

    const Nug& nug() const noexcept { return *nug_; }
    std::shared_ptr<const Nug> shared_nug() const noexcept { return nug_; }
    const ExternalField& field() const noexcept { return field_; }
    const PairwiseSpec& pairwise() const noexcept { return pairwise_; }
    int k() const noexcept { return k_; }
    std::size_t n() const noexcept { return nug_->n_vertices(); }
    bool binary() const noexcept { return k_ == 2; }
    std::string formulation() const { return formulation_name(pairwise_); }

    bool spin_coded() const noexcept { return std::holds_alternative<PhysicsIsing>(pairwise_); }
    bool centered() const noexcept { return std::holds_alternative<CenteredAutologistic>(pairwise_); }

    /// Tabulated singleton potential f(y_i = l), all adjustments included.
    double singleton_potential(std::size_t i, int l) const noexcept
    {
        return singleton_[i * static_cast<std::size_t>(k_) + static_cast<std::size_t>(l)];
    }
    std::span<const double> singleton_table() const noexcept { return singleton_; }

    double pair_potential(State a, State b) const noexcept
    {
        return pair_[static_cast<std::size_t>(a) * static_cast<std::size_t>(k_) + b];
    }
    std::span<const double> pair_table() const noexcept { return pair_; }

    /// Independence-model means mu_j used by the centered autologistic (empty otherwise).
    std::span<const double> centered_means() const noexcept { return mu_; }

    void check(const Configuration& y) const
    {
        detail::require(y.size() == n(), "configuration has " + std::to_string(y.size()) +
                                             " sites, graph has " + std::to_string(n()));
        detail::require(y.k == k_, "configuration k does not match model k");
        for (State s : y.states) {
            detail::require(s < k_, "configuration state out of range");
        }
    }

    /// Sum of all clique potentials; the partition function is omitted.
    double unnormalized_log_density(const Configuration& y) const
    {
        check(y);
        double single = 0.0;
        for (std::size_t i = 0; i < n(); ++i) {
            single += singleton_potential(i, y[i]);
        }
        double pair = 0.0;
        for (const auto& e : nug_->edges()) {
            pair += pair_potential(y[e.a], y[e.b]);
        }
        return single + pair;
    }

    double log_odds(const Configuration& a, const Configuration& b) const
    {
        return unnormalized_log_density(a) - unnormalized_log_density(b);
    }

    /// Parameter names matching natural_parameters() and sufficient_statistics().
    std::vector<std::string> parameter_names() const
    {
        std::vector<std::string> names;
        std::visit(
            [&](const auto& f) {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, ConstantField>) {
                    if (k_ == 2) {
                        names.emplace_back("alpha");
                    } else {
                        for (int l = 1; l < k_; ++l) names.push_back("alpha_" + std::to_string(l));
                    }
                } else if constexpr (std::is_same_v<F, CovariateField>) {
                    for (int l = 1; l < k_; ++l) {
                        for (std::size_t c = 0; c < f.p; ++c) {
                            names.push_back(k_ == 2 ? "beta_" + std::to_string(c)
                                                    : "beta_" + std::to_string(l) + "_" + std::to_string(c));
                        }
                    }
                }
            },
            field_);
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, FlexiblePotts>) {
                    for (int r = 0; r < k_; ++r)
                        for (int c = r; c < k_; ++c)
                            names.push_back("psi_" + std::to_string(r) + "_" + std::to_string(c));
                } else if constexpr (std::is_same_v<S, OrdinalPotts>) {
                    names.insert(names.end(), {"psi1", "psi2", "psi3"});
                } else {
                    names.emplace_back("psi");
                }
            },
            pairwise_);
        return names;
    }

    /**
     * Sufficient statistics [T_1..., T_2...].
     *
     * Singleton part: sum of g(y_i) for a constant binary field (spin or 0/1),
     * per-class counts T_1l (l >= 1) for k > 2, sum of g(y_i) x_i per class for
     * covariate fields, nothing for table fields. Pairwise part: T_2 for the
     * single-psi formulations, unordered pair counts for flexible Potts, and
     * (equal, adjacent, other) counts for ordinal Potts.
     */
    std::vector<double> sufficient_statistics(const Configuration& y) const
    {
        check(y);
        std::vector<double> t;
        const auto g1 = [&](State s, int l) -> double {
            if (spin_coded()) return 2.0 * s - 1.0;
            return s == l ? 1.0 : 0.0;
        };
        std::visit(
            [&](const auto& f) {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, ConstantField>) {
                    for (int l = 1; l < k_; ++l) {
                        double sum = 0.0;
                        for (std::size_t i = 0; i < n(); ++i) sum += g1(y[i], l);
                        t.push_back(sum);
                    }
                } else if constexpr (std::is_same_v<F, CovariateField>) {
                    for (int l = 1; l < k_; ++l) {
                        for (std::size_t c = 0; c < f.p; ++c) {
                            double sum = 0.0;
                            for (std::size_t i = 0; i < n(); ++i) sum += g1(y[i], l) * f.x[i * f.p + c];
                            t.push_back(sum);
                        }
                    }
                }
            },
            field_);
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, FlexiblePotts>) {
                    std::vector<double> counts(static_cast<std::size_t>(k_ * k_), 0.0);
                    for (const auto& e : nug_->edges()) {
                        const auto r = std::min(y[e.a], y[e.b]);
                        const auto c = std::max(y[e.a], y[e.b]);
                        counts[static_cast<std::size_t>(r * k_ + c)] += 1.0;
                    }
                    for (int r = 0; r < k_; ++r)
                        for (int c = r; c < k_; ++c) t.push_back(counts[static_cast<std::size_t>(r * k_ + c)]);
                } else if constexpr (std::is_same_v<S, OrdinalPotts>) {
                    double eq = 0, adj = 0, other = 0;
                    for (const auto& e : nug_->edges()) {
                        const int d = std::abs(static_cast<int>(y[e.a]) - static_cast<int>(y[e.b]));
                        (d == 0 ? eq : (d == 1 ? adj : other)) += 1.0;
                    }
                    t.insert(t.end(), {eq, adj, other});
                } else {
                    double sum = 0.0;
                    for (const auto& e : nug_->edges()) sum += pairwise_g(pairwise_, k_, y[e.a], y[e.b]);
                    t.push_back(sum);
                }
            },
            pairwise_);
        return t;
    }

    /// True when the log-density is exactly natural_parameters()' T(y).
    bool exponential_family() const noexcept
    {
        return !centered() && !std::holds_alternative<SiteTableField>(field_);
    }

    /// Natural parameters xi matching sufficient_statistics(). Table fields
    /// contribute no parameters (their potentials act as a base measure).
    std::vector<double> natural_parameters() const
    {
        if (centered()) {
            throw UnsupportedError("centered autologistic is not linear in its parameters");
        }
        std::vector<double> xi;
        std::visit(
            [&](const auto& f) {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, ConstantField>) {
                    xi.insert(xi.end(), f.alpha.begin(), f.alpha.end());
                } else if constexpr (std::is_same_v<F, CovariateField>) {
                    for (const auto& b : f.beta) xi.insert(xi.end(), b.begin(), b.end());
                }
            },
            field_);
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, FlexiblePotts>) {
                    for (int r = 0; r < k_; ++r)
                        for (int c = r; c < k_; ++c) xi.push_back(s.psi[static_cast<std::size_t>(r * k_ + c)]);
                } else if constexpr (std::is_same_v<S, OrdinalPotts>) {
                    xi.insert(xi.end(), {s.psi1, s.psi2, s.psi3});
                } else {
                    xi.push_back(s.psi);
                }
            },
            pairwise_);
        return xi;
    }

    /// Copy of the model with natural parameters replaced (inverse of natural_parameters()).
    Model with_natural_parameters(std::span<const double> xi) const
    {
        const auto names = parameter_names();
        detail::require(xi.size() == names.size(), "natural parameter vector has wrong length");
        if (centered()) {
            throw UnsupportedError("centered autologistic is not linear in its parameters");
        }
        std::size_t pos = 0;
        ExternalField field = field_;
        std::visit(
            [&](auto& f) {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, ConstantField>) {
                    for (auto& a : f.alpha) a = xi[pos++];
                } else if constexpr (std::is_same_v<F, CovariateField>) {
                    for (auto& b : f.beta)
                        for (auto& v : b) v = xi[pos++];
                }
            },
            field);
        PairwiseSpec pairwise = pairwise_;
        std::visit(
            [&](auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, FlexiblePotts>) {
                    for (int r = 0; r < k_; ++r) {
                        for (int c = r; c < k_; ++c) {
                            s.psi[static_cast<std::size_t>(r * k_ + c)] = xi[pos];
                            s.psi[static_cast<std::size_t>(c * k_ + r)] = xi[pos];
                            ++pos;
                        }
                    }
                } else if constexpr (std::is_same_v<S, OrdinalPotts>) {
                    s.psi1 = xi[pos++];
                    s.psi2 = xi[pos++];
                    s.psi3 = xi[pos++];
                } else {
                    s.psi = xi[pos++];
                }
            },
            pairwise);
        return Model(nug_, std::move(field), std::move(pairwise), k_);
    }

    /// Singleton-table contribution not captured by xi' T(y) (nonzero only for table fields).
    double base_log_measure(const Configuration& y) const
    {
        check(y);
        if (!std::holds_alternative<SiteTableField>(field_)) return 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < n(); ++i) s += singleton_potential(i, y[i]);
        return s;
    }

    /// Unnormalized log-weights of each state at site i given the rest of y,
    /// read off the potential tables (only cliques containing i matter).
    void local_log_weights(const Configuration& y, Vertex i, std::span<double> out) const noexcept
    {
        const auto nb = nug_->neighbors_unchecked(i);
        for (int l = 0; l < k_; ++l) {
            double w = singleton_potential(i, l);
            for (Vertex j : nb) w += pair_potential(static_cast<State>(l), y[j]);
            out[static_cast<std::size_t>(l)] = w;
        }
    }

    /**
     * Full conditional distribution of y_i given its neighbors, evaluated
     * from the formulation's closed form (logistic forms for the binary
     * formulations, soft-max over classes for the Potts family). The
     * centered autologistic uses the centered autocovariate
     * sum_j (y_j - mu_j) with the raw external field.
     */
    std::vector<double> full_conditional(const Configuration& y, Vertex i) const
    {
        check(y);
        const auto nb = nug_->neighbors(i);
        std::vector<double> p(static_cast<std::size_t>(k_));
        const bool table = std::holds_alternative<SiteTableField>(field_);
        const auto raw = [&](int l) { return field_value(field_, i, l); };
        const auto set_binary = [&](double logit1) {
            p[1] = logistic(logit1);
            p[0] = logistic(-logit1);
        };
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, PhysicsIsing>) {
                    double spin_sum = 0.0;
                    for (Vertex j : nb) spin_sum += 2.0 * y[j] - 1.0;
                    if (table) {
                        set_binary(raw(1) - raw(0) + 2.0 * s.psi * spin_sum);
                    } else {
                        // P(+1) = e^eta / (e^-eta + e^eta), eta = alpha_i + psi * sum_j y_j
                        set_binary(2.0 * (raw(1) + s.psi * spin_sum));
                    }
                } else if constexpr (std::is_same_v<S, Autologistic>) {
                    double ones = 0.0;
                    for (Vertex j : nb) ones += y[j];
                    set_binary(raw(1) - raw(0) + s.psi * ones);
                } else if constexpr (std::is_same_v<S, CenteredAutologistic>) {
                    double autocov = 0.0;
                    for (Vertex j : nb) autocov += y[j] - mu_[j];
                    set_binary(raw(1) - raw(0) + s.psi * autocov);
                } else if constexpr (std::is_same_v<S, Ising>) {
                    double ones = 0.0, zeros = 0.0;
                    for (Vertex j : nb) (y[j] == 1 ? ones : zeros) += 1.0;
                    const double w1 = raw(1) + s.psi * ones;
                    const double w0 = raw(0) + s.psi * zeros;
                    set_binary(w1 - w0);
                } else {
                    for (int l = 0; l < k_; ++l) {
                        double w = raw(l);
                        for (Vertex j : nb) w += pair_potential(static_cast<State>(l), y[j]);
                        p[static_cast<std::size_t>(l)] = w;
                    }
                    softmax_inplace(p);
                }
            },
            pairwise_);
        return p;
    }

private:
    void validate() const
    {
        detail::require(k_ >= 2 && k_ <= 255, "k must lie in [2, 255]");
        if (is_binary_formulation(pairwise_)) {
            detail::require(k_ == 2, formulation_name(pairwise_) + " requires k=2");
        }
        if (const auto* f = std::get_if<FlexiblePotts>(&pairwise_)) {
            detail::require(f->psi.size() == static_cast<std::size_t>(k_ * k_),
                            "flexible Potts matrix must be k x k");
            for (int r = 0; r < k_; ++r)
                for (int c = 0; c < k_; ++c)
                    detail::require(f->psi[static_cast<std::size_t>(r * k_ + c)] ==
                                        f->psi[static_cast<std::size_t>(c * k_ + r)],
                                    "flexible Potts matrix must be symmetric");
        }
        if (const auto* o = std::get_if<OrdinalPotts>(&pairwise_)) {
            detail::require(o->psi1 >= o->psi2 && o->psi2 >= o->psi3,
                            "ordinal Potts requires psi1 >= psi2 >= psi3");
        }
        const std::size_t n = nug_->n_vertices();
        const auto classes = static_cast<std::size_t>(k_ - 1);
        std::visit(
            [&](const auto& f) {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, ConstantField>) {
                    detail::require(f.alpha.size() == classes, "constant field needs k-1 alphas");
                } else if constexpr (std::is_same_v<F, CovariateField>) {
                    detail::require(f.x.size() == n * f.p, "covariate matrix must be n x p");
                    detail::require(f.beta.size() == classes, "covariate field needs k-1 coefficient vectors");
                    for (const auto& b : f.beta) {
                        detail::require(b.size() == f.p, "coefficient vector length must equal p");
                    }
                } else {
                    detail::require(f.k == static_cast<std::size_t>(k_) && f.table.size() == n * f.k,
                                    "site table must be n x k");
                }
            },
            field_);
        if (centered()) {
            detail::require(!std::holds_alternative<SiteTableField>(field_),
                            "centered autologistic needs a constant or covariate field");
        }
    }

    void tabulate()
    {
        const std::size_t n = nug_->n_vertices();
        const auto k = static_cast<std::size_t>(k_);
        pair_.resize(k * k);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b)
                pair_[a * k + b] = mrflab::pair_potential(pairwise_, k_, static_cast<State>(a), static_cast<State>(b));

        singleton_.resize(n * k);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < k; ++l) {
                double v = field_value(field_, i, static_cast<int>(l));
                if (spin_coded() && !std::holds_alternative<SiteTableField>(field_)) {
                    // alpha * y_i on the spin scale: class 0 -> -alpha, class 1 -> +alpha
                    v = field_value(field_, i, 1) * (l == 1 ? 1.0 : -1.0);
                }
                singleton_[i * k + l] = v;
            }
        }
        if (centered()) {
            const double psi = std::get<CenteredAutologistic>(pairwise_).psi;
            mu_.resize(n);
            for (std::size_t i = 0; i < n; ++i) mu_[i] = independence_probability(field_, i);
            for (std::size_t i = 0; i < n; ++i) {
                double mu_sum = 0.0;
                for (Vertex j : nug_->neighbors_unchecked(static_cast<Vertex>(i))) mu_sum += mu_[j];
                singleton_[i * k + 1] -= psi * mu_sum;
            }
        }
    }

    std::shared_ptr<const Nug> nug_;
    ExternalField field_;
    PairwiseSpec pairwise_;
    int k_;
    std::vector<double> singleton_;
    std::vector<double> pair_;
    std::vector<double> mu_;
};

// ---------------------------------------------------------------------------
// Hidden MRF conditional field
// ---------------------------------------------------------------------------

struct GaussianEmission {
    double mean = 0.0;
    double sd = 1.0;
};

/// Site table filled from an arbitrary per-(site, class) log emission density.
inline SiteTableField emission_field(std::size_t n, int k, const std::function<double(std::size_t, int)>& log_emission)
{
    SiteTableField f{static_cast<std::size_t>(k), std::vector<double>(n * static_cast<std::size_t>(k))};
    for (std::size_t i = 0; i < n; ++i)
        for (int l = 0; l < k; ++l) f.table[i * f.k + static_cast<std::size_t>(l)] = log_emission(i, l);
    return f;
}

/**
 * Conditional MRF of the latent labels z given Gaussian observations: a Potts
 * model whose singleton potential for class l at site i is
 * -(y_i - mu_l)^2 / (2 sigma_l^2) - log sigma_l.
 */
inline Model hmrf_conditional(std::shared_ptr<const Nug> nug, std::span<const GaussianEmission> emissions,
                              std::span<const double> observations, double psi)
{
    detail::require(nug != nullptr, "hmrf_conditional requires a graph");
    detail::require(emissions.size() >= 2, "need at least two emission classes");
    detail::require(observations.size() == nug->n_vertices(), "one observation per site required");
    for (const auto& e : emissions) {
        detail::require(e.sd > 0.0, "emission standard deviations must be positive");
    }
    const int k = static_cast<int>(emissions.size());
    auto table = emission_field(nug->n_vertices(), k, [&](std::size_t i, int l) {
        const auto& e = emissions[static_cast<std::size_t>(l)];
        const double r = observations[i] - e.mean;
        return -(r * r) / (2.0 * e.sd * e.sd) - std::log(e.sd);
    });
    return Model(std::move(nug), std::move(table), Potts{psi}, k);
}

inline Model hmrf_conditional(const Nug& nug, std::span<const GaussianEmission> emissions,
                              std::span<const double> observations, double psi)
{
    return hmrf_conditional(std::make_shared<const Nug>(nug), emissions, observations, psi);
}

} // namespace mrflab
