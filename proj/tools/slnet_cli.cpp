// slnet: simulate, identify, evaluate and run-all for S+L Monte Carlo studies.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include "slnet/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Options {
    std::string config;
    std::string out;
    int workers = 0;
    long long seed_offset = -1;
};

slnet::ExperimentConfig resolve(const Options& o)
{
    slnet::ExperimentConfig cfg = slnet::load_config(o.config);
    if (!o.out.empty())
        cfg.output_dir = o.out;
    if (o.workers > 0)
        cfg.workers = o.workers;
    if (o.seed_offset >= 0)
        cfg.seed_offset = static_cast<std::uint64_t>(o.seed_offset);
    cfg.validate();
    return cfg;
}

int status_code(const slnet::CommandStatus& st) { return st.ok() ? 0 : 2; }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse plus low-rank network identification experiments"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory (overrides output_dir)");
        sub->add_option("--workers", opt.workers, "concurrent runs (overrides workers)")->check(CLI::PositiveNumber);
        sub->add_option("--seed-offset", opt.seed_offset, "added to every run seed")->check(CLI::NonNegativeNumber);
    };
    auto* sim = app.add_subcommand("simulate", "generate models and data sets");
    auto* ident = app.add_subcommand("identify", "run the configured estimators");
    auto* eval = app.add_subcommand("evaluate", "score results and write metrics.csv / summary.csv");
    auto* all = app.add_subcommand("run-all", "simulate, identify and evaluate");
    for (auto* s : {sim, ident, eval, all})
        add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const slnet::ExperimentConfig cfg = resolve(opt);
        if (sim->parsed())
            return status_code(slnet::cmd_simulate(cfg));
        if (ident->parsed())
            return status_code(slnet::cmd_identify(cfg));
        if (eval->parsed())
            return status_code(slnet::cmd_evaluate(cfg).status);
        return status_code(slnet::cmd_run_all(cfg).status);
    } catch (const slnet::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
