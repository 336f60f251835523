// plat <command> --config <path> [--output-dir <path>]
//
// Prints the resolved config, runs the command, and exits with 0 on success.
// Failures print one line of error JSON to stderr; exit codes follow RunStatus.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "plat/experiment.hpp"

namespace {

int fail(plat::RunStatus status, const std::string& message) {
    std::cerr << plat::error_json(status, message) << '\n';
    return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"p-Laplacian attention experiments"};
    app.set_version_flag("--version", plat::kToolVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    const std::pair<const char*, const char*> commands[] = {
        {"equivcheck", "p=2 reduction checks against softmax attention"},
        {"gradcheck", "analytic vs finite-difference gradients of the toy model"},
        {"flow", "integrate the p-Laplacian gradient flow"},
        {"spectral", "HC/DC ratio and dominant eigenvalue of an attention operator"},
        {"train", "train the toy classifier on a synthetic task"},
        {"audit", "per-layer energy and spectral diagnostics"},
        {"plot", "render SVG charts from CSV outputs"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON experiment config")->required();
        sub->add_option("--output-dir", output_dir, "overrides output_dir from the config");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(plat::RunStatus::invalid_config, e.what());
    }

    const std::string command = app.get_subcommands().front()->get_name();
    plat::ExperimentConfig config;
    try {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw plat::ConfigError("cannot open config file '" + config_path + "'");
        std::ostringstream text;
        text << in.rdbuf();
        config = plat::parse_config_text(text.str(), plat::command_from_string(command));
        if (!output_dir.empty()) config.output_dir = output_dir;
    } catch (const plat::ConfigError& e) {
        return fail(plat::RunStatus::invalid_config, e.what());
    }

    std::cout << plat::config_echo(config).dump(2) << std::endl;

    plat::RunResult result;
    try {
        result = plat::run_experiment(config);
    } catch (const std::exception& e) {
        return fail(plat::RunStatus::runtime_error, e.what());
    }
    if (result.status != plat::RunStatus::ok) return fail(result.status, result.message);
    for (const auto& f : result.files) std::cout << "wrote " << (std::filesystem::path(config.output_dir) / f).string() << '\n';
    return 0;
}
