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

// mrflab command-line tool: sample, response, prior-response, check and
// reproduce <preset>.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "mrflab/experiment.hpp"
#include "mrflab/presets.hpp"

namespace {

struct Flags {
    std::string config_path;
    std::string preset;
    std::string scale;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

unsigned resolve_workers(const Flags& f)
{
    if (f.workers) return std::max(1u, *f.workers);
    if (const char* env = std::getenv("MRFLAB_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw mrflab::ConfigError("MRFLAB_WORKERS", std::string("must be a positive integer, got '") + env + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

mrflab::json load_tree(const Flags& f, const std::string& command)
{
    if (!f.config_path.empty() && !f.preset.empty()) {
        throw mrflab::ConfigError("--config", "give either --config or --preset, not both");
    }
    if (!f.preset.empty()) return mrflab::preset_json(mrflab::resolve_preset_name(f.preset, f.scale));
    if (!f.scale.empty()) throw mrflab::ConfigError("--scale", "applies to presets only");
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw mrflab::ConfigError("--config", "cannot open " + f.config_path);
        try {
            auto j = mrflab::json::parse(in);
            if (j.contains("config") && j.at("config").is_object()) j = j.at("config");
            return j;
        } catch (const mrflab::json::parse_error& e) {
            throw mrflab::ConfigError("--config", std::string("not valid JSON: ") + e.what());
        }
    }
    if (command == "check") return {{"version", mrflab::config_schema_version}, {"command", "check"}, {"seed", mrflab::default_seed}};
    throw mrflab::ConfigError("--config", "a config file or --preset is required");
}

int run(const Flags& f, const std::string& command)
{
    auto tree = load_tree(f, command);
    if (!tree.is_object()) throw mrflab::ConfigError("config", "expected a JSON object");
    if (!command.empty()) tree["command"] = command;
    if (f.seed) tree["seed"] = *f.seed;
    if (!f.out.empty()) tree["output"]["dir"] = f.out;
    const auto cfg = mrflab::parse_config(tree);

    mrflab::RunOptions opts;
    opts.workers = resolve_workers(f);
    opts.quiet = f.quiet;
    opts.log = &std::cerr;
    const auto outcome = mrflab::run_experiment(cfg, opts);
    if (!outcome.report.empty()) std::cout << outcome.report;
    if (!f.quiet) {
        std::cerr << "wrote " << outcome.files.size() << " file(s) to " << cfg.output_dir << " in "
                  << outcome.manifest["wall_time_seconds"].get<double>() << " s\n";
    }
    return outcome.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulation studies for pairwise Markov random fields on lattices"};
    app.set_version_flag("--version", std::string(MRFLAB_VERSION));
    Flags flags;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_path, "JSON config or a previous manifest.json");
        cmd->add_option("--preset", flags.preset, "shipped preset (fig2, fig2-desk, fig4, fig4-desk)");
        cmd->add_option("--scale", flags.scale, "preset scale")->check(CLI::IsMember({"paper", "desk"}));
        cmd->add_option("--workers", flags.workers, "worker threads (default: $MRFLAB_WORKERS or all cores)");
        cmd->add_option("--seed", flags.seed, "override the config seed");
        cmd->add_option("--out", flags.out, "output directory");
        cmd->add_flag("--quiet", flags.quiet, "no progress on stderr");
    };
    add_common(&app);

    std::string command;
    for (const char* name : {"sample", "response", "prior-response", "check"}) {
        auto* sub = app.add_subcommand(name);
        add_common(sub);
        sub->callback([&command, name] { command = name; });
    }
    auto* reproduce = app.add_subcommand("reproduce", "run a shipped preset");
    add_common(reproduce);
    std::string reproduce_name;
    reproduce->add_option("name", reproduce_name, "preset name")->required();
    reproduce->callback([&command] { command = "reproduce"; });
    auto* list = app.add_subcommand("presets", "list shipped presets");
    list->callback([&command] { command = "presets"; });
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? mrflab::exit_ok : mrflab::exit_validation;
    }

    try {
        if (command == "presets") {
            for (const auto& n : mrflab::preset_names()) std::cout << n << '\n';
            return mrflab::exit_ok;
        }
        if (command == "reproduce") {
            if (!flags.preset.empty()) throw mrflab::ConfigError("--preset", "reproduce takes the preset as its argument");
            flags.preset = reproduce_name;
        }
        // reproduce and the bare form take the command from the config.
        return run(flags, command == "reproduce" ? std::string() : command);
    } catch (const mrflab::ResourceLimitError& e) {
        std::cerr << "resource limit: " << e.what() << '\n';
        return mrflab::exit_resource_limit;
    } catch (const mrflab::SamplerError& e) {
        std::cerr << "sampler failure: " << e.what() << '\n';
        return mrflab::exit_sampler_failure;
    } catch (const std::logic_error& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return mrflab::exit_validation;
    } catch (const mrflab::json::exception& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return mrflab::exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return mrflab::exit_check_failed;
    }
}
