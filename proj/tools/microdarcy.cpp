#include <microdarcy/cli.hpp>
#include <microdarcy/errors.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace microdarcy;

int main(int argc, char **argv) {
    CLI::App app{"micropolar cell problems, effective Darcy tensors and epsilon sweeps"};
    std::string command, config_path, out;
    double safety = 0;
    std::vector<std::string> overrides;
    bool print_default = false;
    app.add_option("command", command, "cell-solve | tensors | check | darcy | eps-sweep | unfold | constants")
        ->check(CLI::IsMember(commands()));
    app.add_option("-c,--config", config_path, "config file (dotted key = value); default config otherwise")
        ->check(CLI::ExistingFile);
    app.add_option("-o,--out", out, "output directory (overrides output.directory)");
    app.add_option("--safety-factor", safety, "safety factor s in the existence bound (>= 1)");
    app.add_option("-s,--set", overrides, "override one key, key=value");
    app.add_flag("--print-default-config", print_default, "print the default config and exit");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : exit_config;
    }
    if (print_default) {
        std::cout << default_config_text();
        return 0;
    }
    if (command.empty()) {
        std::cerr << "a command is required\n" << app.help();
        return exit_config;
    }
    Config cfg;
    try {
        cfg = config_path.empty() ? parse_config(default_config_text()) : load_config(config_path);
        for (const auto &kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigInvalid("--set expects key=value, got '" + kv + "'");
            set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!out.empty()) cfg.directory = out;
        if (app.count("--safety-factor")) cfg.safety_factor = safety;
    } catch (const Error &e) {
        std::cerr << e.what() << '\n';
        return exit_config;
    }
    return run(command, cfg, std::cerr);
}
