#include <exception>
#include <iostream>

#include "CLI11.hpp"

#include "statnet/cli.hpp"
#include "statnet/error.hpp"
#include "statnet/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App app{"statnet: l1-regularized shallow network experiments"};
    app.require_subcommand(1);

    statnet::CommandOptions opts;
    const std::pair<const char*, const char*> commands[] = {
        {"gen", "Sample a target network and train/test datasets"},
        {"train", "Multi-start training on a generated dataset"},
        {"table1", "Best versus worst converged run, with a seed sweep"},
        {"theorem1", "Monte Carlo check of the risk bounds"},
        {"verify", "Randomized property suite"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opts.config, "JSON config file")->required();
        sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
        sub->add_flag("--no-timestamp{false}", opts.timestamp,
                      "Omit the generation timestamp from JSON outputs");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return statnet::kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        opts.threads = statnet::worker_threads_from_env();
        if (command == "gen") return statnet::cmd_gen(opts);
        if (command == "train") return statnet::cmd_train(opts);
        if (command == "table1") return statnet::cmd_table1(opts);
        if (command == "theorem1") return statnet::cmd_theorem1(opts);
        return statnet::cmd_verify(opts);
    } catch (const statnet::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return statnet::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << command << " failed: " << e.what() << '\n';
        return statnet::kExitExperiment;
    }
}
