// Command-line front end: epi <command> --config <path> [--seed N] [--out DIR]

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "epi/epi.hpp"

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial SIR epidemic toolkit: particle simulation, hydrodynamic PDE, final-size solvers"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    for (const auto& name : epi::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--out", out, "override the output directory");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        auto cfg = epi::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (out) cfg.out = *out;
        epi::run_command(command, cfg, std::cout);
    } catch (const epi::InputError& e) {
        std::cerr << "epi " << command << ": input error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const epi::NumericalError& e) {
        std::cerr << "epi " << command << ": numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const epi::IoError& e) {
        std::cerr << "epi " << command << ": " << e.what() << '\n';
        return kExitIo;
    }
    return 0;
}
