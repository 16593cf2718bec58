// kamforge_cli --config run.json [--out DIR] [--seed N] [--tol X] [--format csv|json]

#include "kamforge/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
    CLI::App app{"kamforge batch driver"};
    app.set_version_flag("--version", std::string(kamforge::kVersion));
    std::string config;
    kamforge::cli::Overrides ov;
    app.add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--out", ov.out, "output directory");
    app.add_option("--seed", ov.seed, "RNG seed for sampling commands");
    app.add_option("--tol", ov.tol, "rank / Newton tolerance")->check(CLI::Range(0.0, 1.0));
    app.add_option("--format", ov.format, "result format")->check(CLI::IsMember({"csv", "json"}));
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kamforge::cli::kConfigError;
    }
    return kamforge::cli::run_file(config, ov);
}
