#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kvtrim/run_config.hpp"
#include "kvtrim/runner.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("config", args.config_path, "JSON run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "override the config's output directory");
    cmd->add_option("--seed", args.seed, "override the workload seed");
}

kvtrim::RunConfig load(const CommonArgs& args) {
    kvtrim::RunConfig cfg = kvtrim::load_run_config(args.config_path);
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    if (args.seed) cfg.workload.seed = *args.seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KV-cache channel pruning workbench"};
    app.require_subcommand(1);

    CommonArgs run_args, analyze_args, report_args;
    CLI::App* run = app.add_subcommand("run", "prefill + decode pipelines with checks");
    add_common(run, run_args);
    CLI::App* analyze = app.add_subcommand("analyze", "export spectra and magnitude maps");
    add_common(analyze, analyze_args);
    CLI::App* rep = app.add_subcommand("report", "analytic memory reports for a lambda sweep");
    add_common(rep, report_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        // CLI11 returns 0 for --help; anything else is a usage problem.
        return code == 0 ? kvtrim::kExitOk : kvtrim::kExitConfigError;
    }

    try {
        if (run->parsed()) return kvtrim::cmd_run(load(run_args));
        if (analyze->parsed()) return kvtrim::cmd_analyze(load(analyze_args));
        if (rep->parsed()) return kvtrim::cmd_report(load(report_args));
    } catch (const kvtrim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kvtrim::kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kvtrim::kExitConfigError;
    }
    return kvtrim::kExitOk;
}
