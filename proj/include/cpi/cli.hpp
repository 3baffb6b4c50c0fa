#pragma once

#include <cstdint>
#include <string>

#include "cpi/eam.hpp"
#include "cpi/io.hpp"
#include "cpi/model.hpp"

namespace cpi {

/// Builds a validated problem from a parsed config plus a data matrix.
/// Recognized models: box, rotated_box, entry_game, dgp8_linear.
Problem build_problem(const ConfigMap& cfg, const MatrixXd& data);

Options options_from_config(const ConfigMap& cfg);

/// Simulates one dataset per the sim.* keys (sim.dgp selects the generator).
MatrixXd simulate_dataset(const ConfigMap& cfg, const std::string& dgp, std::uint64_t seed);

/// Serializes a run (and the originating config, echoed verbatim under
/// config.*) as a line-oriented result file plus the evaluated-points CSV.
void write_result_files(const std::string& out_path, const RunResult& result,
                        const ConfigMap& cfg);

/// Exit codes: 0 success, 1 invalid input, 2 non-convergence (result still
/// written when available).
int cmd_run(const std::string& config_path, const std::string& data_path,
            const std::string& out_path);

int cmd_simulate(const std::string& config_path, const std::string& dgp_override, int nmc,
                 int sim_lo, int sim_hi, const std::string& out_dir,
                 std::uint64_t seed_override, bool has_seed_override, bool write_data);

int cmd_analyze(const std::string& results_dir, const std::string& config_path,
                const std::string& out_csv);

/// Per-replication seed derived from (master seed, replication index) only,
/// so batch splits reproduce whole-batch runs.
std::uint64_t replication_seed(std::uint64_t master_seed, int replication);

} // namespace cpi
