#include <CLI11.hpp>

#include <string>

#include "cpi/cli.hpp"
#include "cpi/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"calibrated projection confidence intervals for separable "
                 "moment-(in)equality models"};
    app.set_version_flag("--version", cpi::kVersion);
    app.require_subcommand(1);

    std::string config, data, out, dgp, results_dir, out_csv;
    int nmc = 1, sim_lo = 1, sim_hi = 1;
    std::uint64_t seed = 0;
    bool write_data = false;
    int workers = 0;

    CLI::App* run = app.add_subcommand("run", "compute one confidence interval");
    run->add_option("--config", config, "problem configuration file")->required();
    run->add_option("--data", data, "data CSV (n rows, d_W columns, no header)")->required();
    run->add_option("--out", out, "result file path")->required();
    run->add_option("--workers", workers, "worker threads (default: CPI_WORKERS or cores)");

    CLI::App* sim = app.add_subcommand("simulate", "run a seeded simulation batch");
    sim->add_option("--config", config, "problem configuration file")->required();
    sim->add_option("--dgp", dgp, "data-generating process (default: sim.dgp from config)");
    sim->add_option("--nmc", nmc, "total Monte Carlo replications")->required();
    sim->add_option("--sim-lo", sim_lo, "first replication of this batch")->required();
    sim->add_option("--sim-hi", sim_hi, "last replication of this batch")->required();
    sim->add_option("--out", out, "output directory")->required();
    CLI::Option* seed_opt = sim->add_option("--seed", seed, "master seed (default: options.seed)");
    sim->add_flag("--write-data", write_data, "also write each replication's data CSV");
    sim->add_option("--workers", workers, "worker threads");

    CLI::App* ana = app.add_subcommand("analyze", "summarize a directory of result files");
    ana->add_option("--results", results_dir, "directory of .result files")->required();
    ana->add_option("--config", config, "config with analysis.* reference points");
    ana->add_option("--out", out_csv, "summary CSV path");

    CLI11_PARSE(app, argc, argv);

    if (workers > 0) {
#ifdef _WIN32
        _putenv_s("CPI_WORKERS", std::to_string(workers).c_str());
#else
        setenv("CPI_WORKERS", std::to_string(workers).c_str(), 1);
#endif
    }

    if (run->parsed()) return cpi::cmd_run(config, data, out);
    if (sim->parsed())
        return cpi::cmd_simulate(config, dgp, nmc, sim_lo, sim_hi, out,
                                 seed, seed_opt->count() > 0, write_data);
    if (ana->parsed()) return cpi::cmd_analyze(results_dir, config, out_csv);
    return 1;
}
