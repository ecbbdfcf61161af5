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

// Declarative experiment configs, CSV/manifest output and the run drivers
// behind the mrflab command-line tool.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrflab/errors.hpp"
#include "mrflab/exact.hpp"
#include "mrflab/graph.hpp"
#include "mrflab/model.hpp"
#include "mrflab/random.hpp"
#include "mrflab/response.hpp"
#include "mrflab/samplers.hpp"
#include "mrflab/stats.hpp"

#ifndef MRFLAB_VERSION
#define MRFLAB_VERSION "0.0.0"
#endif

namespace mrflab {

using json = nlohmann::json;

inline constexpr int config_schema_version = 1;

/// Seed of the shipped presets and of the default check suite.
inline constexpr std::uint64_t default_seed = 20261019;

enum ExitCode : int {
    exit_ok = 0,
    exit_check_failed = 1,
    exit_validation = 2,
    exit_resource_limit = 3,
    exit_sampler_failure = 4,
};

/// Validation failure naming the offending config field.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(field)
    {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// 17 significant digits, round-trip exact and locale independent.
inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Config types
// ---------------------------------------------------------------------------

struct FieldSpec {
    std::string type = "constant"; // constant | covariate | table | emission
    std::vector<double> alpha;     // constant: k-1 values
    std::vector<std::string> columns;
    std::vector<std::vector<double>> x_rows;
    std::vector<std::vector<double>> beta; // covariate: per non-reference class
    std::vector<std::vector<double>> table;
    std::vector<GaussianEmission> emissions;
    std::vector<double> observations;
};

struct ModelSpec {
    std::string label;
    std::string formulation = "ising";
    int k = 2;
    double psi = 0.0;
    std::vector<std::vector<double>> psi_matrix;
    double psi1 = 0.0, psi2 = 0.0, psi3 = 0.0;
    FieldSpec field;
    SamplerSpec sampler;
};

struct StudySpec {
    GridSpec grid;
    std::size_t draws = 0;
    std::vector<StatisticKind> statistics;
    std::vector<FunctionalKind> functionals;
    std::optional<PriorSpec> prior;
    std::size_t bootstrap_resamples = 200;
    std::size_t smoothing_window = 1;
};

struct CheckTolerances {
    double gradient_mean = 1e-6;
    double gradient_variance = 1e-4;
    double tv = 0.02;
    double moment_se = 3.0;
    std::size_t moment_draws = 50000;
    std::size_t tv_draws = 10000;
    std::uint64_t enumeration_cap = std::uint64_t{1} << 24;
};

struct ExperimentConfig {
    json echo; // resolved config, written back into the manifest
    std::string name;
    std::string command; // sample | response | prior-response | check
    std::uint64_t seed = 0;
    std::size_t rows = 0, cols = 0;
    NeighborhoodOrder order = NeighborhoodOrder::first;
    std::vector<ModelSpec> models;
    StudySpec study;
    std::size_t sample_count = 1;
    CheckTolerances tolerances;
    std::string output_dir = "out";
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& path)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + "." + key, std::string("wrong type (") + e.what() + ")");
    }
}

inline const json& need(const json& j, const char* key, const std::string& path)
{
    if (!j.is_object() || !j.contains(key)) throw ConfigError(path + "." + key, "missing");
    return j.at(key);
}

inline std::vector<double> number_list(const json& j, const std::string& path)
{
    if (j.is_number()) return {j.get<double>()};
    if (!j.is_array()) throw ConfigError(path, "expected a number or an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw ConfigError(path, "expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

inline std::vector<std::vector<double>> number_matrix(const json& j, const std::string& path)
{
    if (!j.is_array()) throw ConfigError(path, "expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < j.size(); ++r) out.push_back(number_list(j[r], path + "[" + std::to_string(r) + "]"));
    return out;
}

inline SamplerSpec parse_sampler(const json& j, SamplerSpec base, const std::string& path)
{
    if (j.is_null()) return base;
    const auto kind = get_or<std::string>(j, "kind", to_string(base.kind), path);
    if (kind == "gibbs") base.kind = SamplerKind::gibbs;
    else if (kind == "swendsen_wang") base.kind = SamplerKind::swendsen_wang;
    else if (kind == "cftp") base.kind = SamplerKind::cftp;
    else throw ConfigError(path + ".kind", "unknown sampler '" + kind + "'");
    base.sweeps = get_or<std::size_t>(j, "sweeps", base.sweeps, path);
    base.max_epoch = get_or<std::size_t>(j, "max_epoch", base.max_epoch, path);
    const auto init = get_or<std::string>(j, "init", to_string(base.init), path);
    if (init == "all_zero") base.init = InitKind::all_zero;
    else if (init == "all_one") base.init = InitKind::all_one;
    else if (init == "uniform_random") base.init = InitKind::uniform_random;
    else if (init == "given") base.init = InitKind::given;
    else throw ConfigError(path + ".init", "unknown init '" + init + "'");
    if (base.init == InitKind::given) {
        const auto states = number_list(need(j, "initial", path), path + ".initial");
        std::vector<State> s;
        for (double v : states) s.push_back(static_cast<State>(v));
        base.initial = Configuration(std::move(s), 2);
    }
    if (base.kind != SamplerKind::cftp && base.sweeps < 1) throw ConfigError(path + ".sweeps", "must be >= 1");
    return base;
}

inline FieldSpec parse_field(const json& j, const std::string& path)
{
    FieldSpec f;
    if (j.is_null()) {
        f.alpha = {0.0};
        return f;
    }
    f.type = get_or<std::string>(j, "type", "constant", path);
    if (f.type == "constant") {
        f.alpha = j.contains("alpha") ? number_list(j.at("alpha"), path + ".alpha") : std::vector<double>{0.0};
    } else if (f.type == "covariate") {
        if (j.contains("columns")) {
            f.columns = get_or<std::vector<std::string>>(j, "columns", {}, path);
        } else {
            f.x_rows = number_matrix(need(j, "x", path), path + ".x");
        }
        const auto& beta = need(j, "beta", path);
        if (beta.is_array() && !beta.empty() && beta.front().is_array()) {
            f.beta = number_matrix(beta, path + ".beta");
        } else {
            f.beta = {number_list(beta, path + ".beta")};
        }
    } else if (f.type == "table") {
        f.table = number_matrix(need(j, "table", path), path + ".table");
    } else if (f.type == "emission") {
        const auto means = number_list(need(j, "means", path), path + ".means");
        const auto sds = number_list(need(j, "sds", path), path + ".sds");
        if (means.size() != sds.size()) throw ConfigError(path + ".sds", "must match means in length");
        for (std::size_t l = 0; l < means.size(); ++l) {
            if (!(sds[l] > 0.0)) throw ConfigError(path + ".sds", "must be positive");
            f.emissions.push_back({means[l], sds[l]});
        }
        f.observations = number_list(need(j, "observations", path), path + ".observations");
    } else {
        throw ConfigError(path + ".type", "unknown field type '" + f.type + "'");
    }
    return f;
}

inline ModelSpec parse_model(const json& j, const SamplerSpec& default_sampler, const std::string& path)
{
    ModelSpec m;
    m.formulation = get_or<std::string>(j, "formulation", "ising", path);
    m.label = get_or<std::string>(j, "label", m.formulation, path);
    m.k = get_or<int>(j, "k", 2, path);
    m.psi = get_or<double>(j, "psi", 0.0, path);
    if (j.contains("psi_matrix")) m.psi_matrix = number_matrix(j.at("psi_matrix"), path + ".psi_matrix");
    m.psi1 = get_or<double>(j, "psi1", 0.0, path);
    m.psi2 = get_or<double>(j, "psi2", 0.0, path);
    m.psi3 = get_or<double>(j, "psi3", 0.0, path);
    m.field = parse_field(j.contains("field") ? j.at("field") : json(), path + ".field");
    m.sampler = parse_sampler(j.contains("sampler") ? j.at("sampler") : json(), default_sampler, path + ".sampler");
    static const char* known[] = {"physics_ising", "autologistic", "centered_autologistic", "ising",
                                  "potts",         "flexible_potts", "ordinal_potts"};
    if (std::find(std::begin(known), std::end(known), m.formulation) == std::end(known)) {
        throw ConfigError(path + ".formulation", "unknown formulation '" + m.formulation + "'");
    }
    return m;
}

inline GridSpec parse_grid(const json& study, const std::string& path)
{
    const auto name = get_or<std::string>(study, "parameter", "psi", path);
    if (name != "psi" && name != "alpha") throw ConfigError(path + ".parameter", "must be 'psi' or 'alpha'");
    const auto& g = need(study, "grid", path);
    GridSpec grid;
    if (g.is_array()) {
        grid = GridSpec{name, number_list(g, path + ".grid")};
    } else {
        const double start = get_or<double>(g, "start", 0.0, path + ".grid");
        const double stop = need(g, "stop", path + ".grid").get<double>();
        const double step = need(g, "step", path + ".grid").get<double>();
        if (!(step > 0.0)) throw ConfigError(path + ".grid.step", "must be positive");
        if (stop < start) throw ConfigError(path + ".grid.stop", "must not precede start");
        grid = GridSpec::range(name, start, stop, step);
    }
    if (grid.points.empty()) throw ConfigError(path + ".grid", "must have at least one point");
    for (std::size_t i = 1; i < grid.points.size(); ++i) {
        if (!(grid.points[i] > grid.points[i - 1])) throw ConfigError(path + ".grid", "must be strictly increasing");
    }
    return grid;
}

} // namespace detail

inline ExperimentConfig parse_config(const json& input)
{
    // A manifest carries the resolved config under "config".
    const json& j = input.contains("config") && input.at("config").is_object() ? input.at("config") : input;
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
    ExperimentConfig c;
    c.echo = j;
    const int version = detail::get_or<int>(j, "version", config_schema_version, "config");
    if (version != config_schema_version) {
        throw ConfigError("version", "unsupported schema version " + std::to_string(version));
    }
    c.name = detail::get_or<std::string>(j, "name", "experiment", "config");
    c.command = detail::get_or<std::string>(j, "command", "response", "config");
    if (!j.contains("seed")) throw ConfigError("seed", "missing (runs are never seeded from the clock)");
    c.seed = detail::get_or<std::uint64_t>(j, "seed", 0, "config");

    // check runs its built-in suite plus gradient checks of any configured models.
    if (c.command != "check" || j.contains("lattice")) {
        const auto& lat = detail::need(j, "lattice", "config");
        c.rows = detail::need(lat, "rows", "lattice").get<std::size_t>();
        c.cols = detail::need(lat, "cols", "lattice").get<std::size_t>();
        if (c.rows < 1 || c.cols < 1) throw ConfigError("lattice", "rows and cols must be >= 1");
        const auto order = detail::get_or<std::string>(lat, "order", "first", "lattice");
        if (order == "first") c.order = NeighborhoodOrder::first;
        else if (order == "second") c.order = NeighborhoodOrder::second;
        else throw ConfigError("lattice.order", "must be 'first' or 'second'");

        SamplerSpec default_sampler;
        default_sampler = detail::parse_sampler(j.contains("sampler") ? j.at("sampler") : json(), default_sampler,
                                                "sampler");
        if (j.contains("models")) {
            const auto& ms = j.at("models");
            if (!ms.is_array() || ms.empty()) throw ConfigError("models", "must be a non-empty array");
            for (std::size_t m = 0; m < ms.size(); ++m) {
                c.models.push_back(detail::parse_model(ms[m], default_sampler, "models[" + std::to_string(m) + "]"));
            }
        } else {
            c.models.push_back(detail::parse_model(detail::need(j, "model", "config"), default_sampler, "model"));
        }
        for (auto& m : c.models) m.sampler.seed = c.seed;
    }

    if (c.command == "response" || c.command == "prior-response") {
        const auto& s = detail::need(j, "study", "config");
        c.study.grid = detail::parse_grid(s, "study");
        c.study.draws = detail::need(s, "draws", "study").get<std::size_t>();
        if (c.study.draws < 2) throw ConfigError("study.draws", "must be >= 2");
        const auto stats = detail::get_or<std::vector<std::string>>(s, "statistics", {}, "study");
        if (stats.empty()) throw ConfigError("study.statistics", "must list at least one statistic");
        for (const auto& name : stats) {
            try {
                c.study.statistics.push_back(parse_statistic(name));
            } catch (const std::invalid_argument& e) {
                throw ConfigError("study.statistics", e.what());
            }
        }
        const auto funcs = detail::get_or<std::vector<std::string>>(s, "functionals", {"mean"}, "study");
        if (funcs.empty()) throw ConfigError("study.functionals", "must list at least one functional");
        for (const auto& name : funcs) {
            try {
                c.study.functionals.push_back(parse_functional(name));
            } catch (const std::invalid_argument& e) {
                throw ConfigError("study.functionals", e.what());
            }
        }
        c.study.bootstrap_resamples = detail::get_or<std::size_t>(s, "bootstrap_resamples", 200, "study");
        c.study.smoothing_window = detail::get_or<std::size_t>(s, "smoothing_window", 1, "study");
        if (c.study.smoothing_window % 2 == 0) throw ConfigError("study.smoothing_window", "must be odd");
        if (c.command == "prior-response") {
            const auto& p = detail::need(s, "prior", "study");
            if (!p.is_array() || p.empty()) throw ConfigError("study.prior", "must be a non-empty array");
            PriorSpec prior;
            for (const auto& e : p) {
                NormalPrior np{detail::get_or<double>(e, "mean", 0.0, "study.prior"),
                               detail::get_or<double>(e, "sd", 1.0, "study.prior")};
                if (!(np.sd >= 0.0)) throw ConfigError("study.prior", "sd must be >= 0");
                prior.coefficients.push_back(np);
            }
            c.study.prior = prior;
        }
    } else if (c.command == "sample") {
        if (j.contains("sample")) c.sample_count = detail::get_or<std::size_t>(j.at("sample"), "count", 1, "sample");
    } else if (c.command == "check") {
        if (j.contains("check") && j.at("check").contains("tolerances")) {
            const auto& t = j.at("check").at("tolerances");
            auto& tol = c.tolerances;
            tol.gradient_mean = detail::get_or<double>(t, "gradient_mean", tol.gradient_mean, "check.tolerances");
            tol.gradient_variance =
                detail::get_or<double>(t, "gradient_variance", tol.gradient_variance, "check.tolerances");
            tol.tv = detail::get_or<double>(t, "tv", tol.tv, "check.tolerances");
            tol.moment_se = detail::get_or<double>(t, "moment_se", tol.moment_se, "check.tolerances");
            tol.moment_draws = detail::get_or<std::size_t>(t, "moment_draws", tol.moment_draws, "check.tolerances");
            tol.tv_draws = detail::get_or<std::size_t>(t, "tv_draws", tol.tv_draws, "check.tolerances");
            tol.enumeration_cap =
                detail::get_or<std::uint64_t>(t, "enumeration_cap", tol.enumeration_cap, "check.tolerances");
        }
    } else {
        throw ConfigError("command", "unknown command '" + c.command + "'");
    }
    if (j.contains("output")) c.output_dir = detail::get_or<std::string>(j.at("output"), "dir", c.output_dir, "output");
    return c;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("--config", std::string("not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

inline PairwiseSpec make_pairwise(const ModelSpec& m, double psi)
{
    const auto& f = m.formulation;
    if (f == "physics_ising") return PhysicsIsing{psi};
    if (f == "autologistic") return Autologistic{psi};
    if (f == "centered_autologistic") return CenteredAutologistic{psi};
    if (f == "ising") return Ising{psi};
    if (f == "potts") return Potts{psi};
    if (f == "ordinal_potts") return OrdinalPotts{m.psi1, m.psi2, m.psi3};
    FlexiblePotts fp;
    if (m.psi_matrix.size() != static_cast<std::size_t>(m.k)) throw ConfigError(m.label + ".psi_matrix", "must be k x k");
    for (const auto& row : m.psi_matrix) {
        if (row.size() != static_cast<std::size_t>(m.k)) throw ConfigError(m.label + ".psi_matrix", "must be k x k");
        fp.psi.insert(fp.psi.end(), row.begin(), row.end());
    }
    return fp;
}

/**
 * Builds the model for one grid value. `parameter` is "psi" or "alpha";
 * `coefficients`, when given, replace the field's beta (or alpha for a
 * constant field) as drawn from a prior.
 */
inline Model make_model(const ModelSpec& m, const std::shared_ptr<const Nug>& nug, const std::string& parameter,
                        std::optional<double> value, std::span<const double> coefficients = {})
{
    const std::size_t n = nug->n_vertices();
    const double psi = parameter == "psi" && value ? *value : m.psi;
    ExternalField field;
    const auto& f = m.field;
    if (f.type == "constant") {
        std::vector<double> alpha = f.alpha;
        if (!coefficients.empty()) alpha.assign(coefficients.begin(), coefficients.end());
        if (parameter == "alpha" && value) {
            if (alpha.size() != 1) throw ConfigError("study.parameter", "alpha grid needs a binary constant field");
            alpha[0] = *value;
        }
        field = ConstantField{alpha};
    } else if (f.type == "covariate") {
        if (parameter == "alpha" && value) throw ConfigError("study.parameter", "alpha grid needs a constant field");
        CovariateField cf;
        if (!f.columns.empty()) {
            cf.p = f.columns.size();
            cf.x.assign(n * cf.p, 0.0);
            for (std::size_t c = 0; c < cf.p; ++c) {
                std::vector<double> col;
                if (f.columns[c] == "intercept") {
                    col.assign(n, 1.0);
                } else if (f.columns[c] == "gradient") {
                    if (!nug->rows() || nug->rows() != nug->cols())
                        throw ConfigError("field.columns", "gradient covariate needs a square lattice");
                    col = build_gradient_covariate(*nug->rows());
                } else {
                    throw ConfigError("field.columns", "unknown covariate column '" + f.columns[c] + "'");
                }
                for (std::size_t i = 0; i < n; ++i) cf.x[i * cf.p + c] = col[i];
            }
        } else {
            if (f.x_rows.size() != n) throw ConfigError("field.x", "needs one row per site");
            cf.p = f.x_rows.front().size();
            for (const auto& row : f.x_rows) {
                if (row.size() != cf.p) throw ConfigError("field.x", "rows must have equal length");
                cf.x.insert(cf.x.end(), row.begin(), row.end());
            }
        }
        cf.beta = f.beta;
        if (!coefficients.empty()) {
            if (coefficients.size() != cf.p * static_cast<std::size_t>(m.k - 1))
                throw ConfigError("study.prior", "needs one entry per covariate coefficient");
            for (std::size_t l = 0; l < cf.beta.size(); ++l)
                for (std::size_t c = 0; c < cf.p; ++c) cf.beta[l][c] = coefficients[l * cf.p + c];
        }
        field = cf;
    } else if (f.type == "table") {
        if (f.table.size() != n) throw ConfigError("field.table", "needs one row per site");
        SiteTableField tf{static_cast<std::size_t>(m.k), {}};
        for (const auto& row : f.table) {
            if (row.size() != static_cast<std::size_t>(m.k)) throw ConfigError("field.table", "rows must have k entries");
            tf.table.insert(tf.table.end(), row.begin(), row.end());
        }
        field = tf;
    } else {
        if (f.observations.size() != n) throw ConfigError("field.observations", "needs one observation per site");
        if (f.emissions.size() != static_cast<std::size_t>(m.k)) throw ConfigError("field.means", "needs k classes");
        field = emission_field(n, m.k, [&](std::size_t i, int l) {
            const auto& e = f.emissions[static_cast<std::size_t>(l)];
            const double r = f.observations[i] - e.mean;
            return -(r * r) / (2.0 * e.sd * e.sd) - std::log(e.sd);
        });
    }
    return Model(nug, std::move(field), make_pairwise(m, psi), m.k);
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline constexpr const char* response_csv_header =
    "param_name,param_value,statistic,functional,estimate,mc_se,B,sampler,sweeps,seed";

/// Rows ordered by grid point, then statistic, then functional. Failed grid
/// points are omitted.
inline std::size_t write_response_csv(std::ostream& out, const StudyResult& result)
{
    out << response_csv_header << '\n';
    if (result.estimates.empty()) return 0;
    std::size_t rows = 0;
    const std::size_t J = result.estimates.front().points.size();
    for (std::size_t j = 0; j < J; ++j) {
        for (const auto& est : result.estimates) {
            const auto& p = est.points[j];
            if (!p.ok) continue;
            const auto sweeps = est.sampler.kind == SamplerKind::cftp ? std::size_t{0} : est.sampler.sweeps;
            out << est.grid.parameter << ',' << format_double(p.value) << ',' << to_string(est.statistic) << ','
                << to_string(est.functional) << ',' << format_double(p.estimate) << ',' << format_double(p.mc_se)
                << ',' << p.draws << ',' << to_string(est.sampler.kind) << ',' << sweeps << ',' << est.seed << '\n';
            ++rows;
        }
    }
    return rows;
}

inline void write_configuration_csv(std::ostream& out, const Configuration& y)
{
    out << "index,state\n";
    for (std::size_t i = 0; i < y.size(); ++i) out << i << ',' << static_cast<int>(y[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct RunOptions {
    unsigned workers = 1;
    bool quiet = false;
    std::ostream* log = nullptr;
};

struct RunOutcome {
    int exit_code = exit_ok;
    std::vector<std::filesystem::path> files;
    json manifest;
    std::string report;
};

namespace detail {

inline void log_line(const RunOptions& opts, const std::string& line)
{
    if (opts.log && !opts.quiet) *opts.log << line << '\n';
}

inline std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    return path;
}

struct CheckLine {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

inline std::vector<CheckLine> run_check_suite(const ExperimentConfig& cfg, unsigned workers)
{
    const auto& tol = cfg.tolerances;
    std::vector<CheckLine> lines;
    auto lattice = [](std::size_t r, std::size_t c) {
        return std::make_shared<const Nug>(build_lattice(r, c, NeighborhoodOrder::first));
    };
    const auto g33 = lattice(3, 3);
    const auto g23 = lattice(2, 3);
    const auto g22 = lattice(2, 2);

    struct GradCase {
        std::string name;
        Model model;
    };
    std::vector<GradCase> grads;
    if (!cfg.models.empty()) {
        const auto nug = std::make_shared<const Nug>(build_lattice(cfg.rows, cfg.cols, cfg.order));
        for (const auto& m : cfg.models) {
            grads.push_back({"gradient " + m.label + " " + std::to_string(cfg.rows) + "x" + std::to_string(cfg.cols),
                             make_model(m, nug, "psi", std::nullopt)});
        }
    }
    const std::vector<GradCase> builtin = {
        {"gradient ising 3x3", Model(g33, constant_field(0.2), Ising{0.4}, 2)},
        {"gradient physics_ising 3x3", Model(g33, constant_field(0.1), PhysicsIsing{0.2}, 2)},
        {"gradient autologistic 2x3", Model(g23, constant_field(-0.1), Autologistic{0.3}, 2)},
        {"gradient potts k=3 2x3", Model(g23, ConstantField{{0.3, -0.2}}, Potts{0.5}, 3)},
    };
    grads.insert(grads.end(), builtin.begin(), builtin.end());
    EnumerationOptions eo;
    eo.cap = tol.enumeration_cap;
    eo.workers = workers;
    for (const auto& gc : grads) {
        const auto rep = gradient_check(gc.model, 1e-4, eo);
        lines.push_back({gc.name + " |dA - E[T]|", rep.max_mean_residual(), tol.gradient_mean,
                         rep.max_mean_residual() < tol.gradient_mean});
        lines.push_back({gc.name + " |d2A - var[T]|", rep.max_variance_residual(), tol.gradient_variance,
                         rep.max_variance_residual() < tol.gradient_variance});
    }

    const RandomSource root(cfg.seed);
    auto moment_check = [&](const std::string& name, const Model& model, SamplerKind kind, std::uint64_t tag) {
        SamplerSpec spec;
        spec.kind = kind;
        spec.sweeps = 50;
        const auto draws = sample_batch(model, spec, tol.moment_draws, root.split(tag), workers);
        const auto exact = enumerate(model);
        for (std::size_t t = 0; t < exact.statistic_means.size(); ++t) {
            std::vector<double> v(draws.size());
            for (std::size_t b = 0; b < draws.size(); ++b) v[b] = model.sufficient_statistics(draws[b])[t];
            const double se = apply_functional(FunctionalKind::sd, v) / std::sqrt(static_cast<double>(v.size()));
            const double z = std::abs(apply_functional(FunctionalKind::mean, v) - exact.statistic_means[t]) / se;
            lines.push_back({name + " E[T" + std::to_string(t + 1) + "] z-score", z, tol.moment_se, z < tol.moment_se});
        }
    };
    const Model ising33(g33, constant_field(0.2), Ising{0.4}, 2);
    const Model auto33(g33, constant_field(-0.1), Autologistic{0.6}, 2);
    moment_check("gibbs ising 3x3", ising33, SamplerKind::gibbs, 1);
    moment_check("swendsen_wang ising 3x3", ising33, SamplerKind::swendsen_wang, 2);
    moment_check("gibbs autologistic 3x3", auto33, SamplerKind::gibbs, 3);

    auto tv_check = [&](const std::string& name, const Model& model, std::uint64_t tag) {
        SamplerSpec spec;
        spec.kind = SamplerKind::cftp;
        const auto draws = sample_batch(model, spec, tol.tv_draws, root.split(tag), workers);
        const auto exact = enumerate(model, true);
        const double tv = total_variation(EmpiricalDistribution::from_samples(draws), exact);
        lines.push_back({name, tv, tol.tv, tv < tol.tv});
    };
    tv_check("cftp ising 2x2 TV", Model(g22, constant_field(0.2), Ising{0.5}, 2), 4);
    tv_check("cftp autologistic 2x2 TV", Model(g22, constant_field(0.0), Autologistic{0.8}, 2), 5);
    return lines;
}

} // namespace detail

/**
 * Executes a parsed config and writes its outputs plus manifest.json into
 * `cfg.output_dir`. Validation problems throw ConfigError /
 * std::invalid_argument, enumeration caps throw ResourceLimitError and
 * sampler failures either throw SamplerError or, for partial study results,
 * are reported through exit_code.
 */
inline RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {})
{
    namespace fs = std::filesystem;
    const auto started = std::chrono::steady_clock::now();
    fs::create_directories(cfg.output_dir);
    const fs::path out_dir(cfg.output_dir);
    RunOutcome outcome;
    json counts = json::object();
    json failures = json::array();

    if (cfg.command == "check") {
        const auto lines = detail::run_check_suite(cfg, opts.workers);
        std::ostringstream report, csv;
        csv << "check,value,tolerance,result\n";
        bool all = true;
        for (const auto& l : lines) {
            report << (l.pass ? "PASS " : "FAIL ") << std::left << std::setw(44) << l.name << " value="
                   << format_double(l.value) << " tol=" << format_double(l.tolerance) << '\n';
            csv << l.name << ',' << format_double(l.value) << ',' << format_double(l.tolerance) << ','
                << (l.pass ? "pass" : "fail") << '\n';
            all = all && l.pass;
        }
        outcome.report = report.str();
        outcome.files.push_back(detail::write_text(out_dir / "check.csv", csv.str()));
        outcome.exit_code = all ? exit_ok : exit_check_failed;
        counts["checks"] = lines.size();
    } else {
        const auto nug = std::make_shared<const Nug>(build_lattice(cfg.rows, cfg.cols, cfg.order));
        const RandomSource root(cfg.seed);
        for (std::size_t m = 0; m < cfg.models.size(); ++m) {
            const auto& spec = cfg.models[m];
            const RandomSource model_rng = root.split(m);
            if (cfg.command == "sample") {
                const Model model = make_model(spec, nug, "psi", std::nullopt);
                const auto draws = sample_batch(model, spec.sampler, cfg.sample_count, model_rng, opts.workers);
                for (std::size_t b = 0; b < draws.size(); ++b) {
                    std::ostringstream csv;
                    write_configuration_csv(csv, draws[b]);
                    outcome.files.push_back(detail::write_text(
                        out_dir / (spec.label + "_sample_" + std::to_string(b) + ".csv"), csv.str()));
                }
                counts[spec.label] = {{"draws", draws.size()}, {"sites", nug->n_vertices()}};
                continue;
            }

            StudyOptions so;
            so.workers = opts.workers;
            so.bootstrap_resamples = cfg.study.bootstrap_resamples;
            so.family_name = spec.label;
            so.keep_going = true;
            const auto& grid = cfg.study.grid;
            detail::log_line(opts, "[" + spec.label + "] " + std::to_string(grid.points.size()) + " grid points x " +
                                       std::to_string(cfg.study.draws) + " draws");
            StudyResult result;
            if (cfg.command == "response") {
                result = run_response_study(
                    [&](double w) { return make_model(spec, nug, grid.parameter, w); }, grid, cfg.study.statistics,
                    cfg.study.functionals, cfg.study.draws, spec.sampler, model_rng, so);
            } else {
                result = run_prior_predictive_study(
                    [&](double w, std::span<const double> coef) {
                        return make_model(spec, nug, grid.parameter, w, coef);
                    },
                    grid, *cfg.study.prior, cfg.study.statistics, cfg.study.functionals, cfg.study.draws,
                    spec.sampler, model_rng, so);
            }
            if (cfg.study.smoothing_window > 1) {
                for (auto& e : result.estimates) e = smooth_estimate(e, cfg.study.smoothing_window);
            }
            std::ostringstream csv;
            const auto rows = write_response_csv(csv, result);
            outcome.files.push_back(detail::write_text(out_dir / (spec.label + ".csv"), csv.str()));
            for (const auto& f : result.failures()) {
                failures.push_back({{"model", spec.label}, {"error", f}});
                detail::log_line(opts, "[" + spec.label + "] " + f);
            }
            counts[spec.label] = {{"grid_points", grid.points.size()},
                                  {"draws_per_point", cfg.study.draws},
                                  {"rows", rows},
                                  {"failed_points", result.failures().size()}};
        }
        if (!failures.empty()) outcome.exit_code = exit_sampler_failure;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    outcome.manifest = {{"config", cfg.echo},
                        {"library_version", MRFLAB_VERSION},
                        {"command", cfg.command},
                        {"seed", cfg.seed},
                        {"workers", opts.workers},
                        {"wall_time_seconds", wall},
                        {"counts", counts},
                        {"failures", failures},
                        {"exit_code", outcome.exit_code}};
    json files = json::array();
    for (const auto& f : outcome.files) files.push_back(f.filename().string());
    outcome.manifest["outputs"] = files;
    outcome.files.push_back(detail::write_text(out_dir / "manifest.json", outcome.manifest.dump(2) + "\n"));
    return outcome;
}

} // namespace mrflab
