#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "hfl/lab.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hflab: Hermite-Fejer interpolation experiments on exponential weights"};
    app.set_version_flag("--version", std::string("hflab ") + HFL_VERSION);
    app.require_subcommand(1);

    std::string config;
    const char* help[][2] = {
        {"mrs", "Tabulate t, a_t, delta_t, T(a_t), eps_t"},
        {"nodes", "Zeros of p_n with p_n' and phi_n"},
        {"interp", "Evaluate L_n(l, nu, f) and its split on a grid"},
        {"converge", "Weighted L_p error reports across the n list"},
        {"diagnose", "Recorded bands for the selected diagnostics"},
        {"selftest", "Closed-form reference checks and a short run"},
    };
    for (auto& [name, text] : help) {
        auto* sub = app.add_subcommand(name, text);
        sub->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : hfl::lab::exit_config;
    }
    return hfl::lab::run_command(app.get_subcommands().front()->get_name(), config);
}
