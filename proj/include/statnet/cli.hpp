#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "statnet/optimizer.hpp"

namespace statnet {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitExperiment = 2;
inline constexpr int kExitVerification = 3;

struct CommandOptions {
    std::filesystem::path config;
    std::filesystem::path out = ".";
    bool timestamp = true;
    std::size_t threads = 1;
};

/// Each command reads its JSON config, writes its artifacts under opts.out
/// and returns an exit code. Config problems surface as ConfigError, failed
/// experiments as other statnet::Error subclasses.
int cmd_gen(const CommandOptions& opts);
int cmd_train(const CommandOptions& opts);
int cmd_table1(const CommandOptions& opts);
int cmd_theorem1(const CommandOptions& opts);
int cmd_verify(const CommandOptions& opts);

/// Restart i of a multi-start on the data drawn from `data_seed` uses
/// initialization seed (data_seed << 10) + i.
std::uint64_t restart_seed_base(std::uint64_t data_seed);

/// One row of the best-versus-worst comparison.
struct ExperimentRecord {
    std::size_t run_id = 0;
    std::uint64_t seed = 0;
    double final_objective = 0.0;
    double train_error = 0.0;
    double test_error = 0.0;
    double population_risk = 0.0;
    double kkt_residual = 0.0;
    bool converged = false;
    double relative_train_error = 0.0;
    double relative_test_error = 0.0;
};

/// Best (lowest training error) and worst (highest training error) among
/// the converged runs, with every record normalized by the best.
struct Table1Outcome {
    std::vector<ExperimentRecord> records;
    std::size_t best = 0;
    std::size_t worst = 0;
    std::size_t converged = 0;
};

/// Builds records from finished runs. Population risk is the closed form for
/// the linear model and the error on `population_sample` (a large fresh
/// sample) for ReLU. Throws ExperimentError when fewer than two runs
/// converged.
Table1Outcome compare_runs(const std::vector<TrainResult>& runs, const Dataset& train,
                           const Dataset& test, const NetworkParams& target,
                           const Dataset& population_sample);

} // namespace statnet
