#include "statnet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <limits>

#include "statnet/config.hpp"
#include "statnet/datagen.hpp"
#include "statnet/parallel.hpp"
#include "statnet/text_io.hpp"
#include "statnet/theory_verifier.hpp"
#include "statnet/verify_suite.hpp"

namespace statnet {

namespace {

using nlohmann::json;

constexpr Eigen::Index kPopulationSampleSize = 20000;

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void stamp(json& j, const CommandOptions& opts) {
    if (opts.timestamp) j["generated_at"] = utc_now();
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

int read_count(ConfigReader& reader, const std::string& key, int fallback, int minimum) {
    const int value = reader.optional<int>(key, fallback);
    if (value < minimum) {
        reader.fail("'" + key + "' must be at least " + std::to_string(minimum));
    }
    return value;
}

json train_config_json(const TrainConfig& cfg) {
    json j{{"max_iters", cfg.max_iters},
           {"kkt_tolerance", cfg.kkt_tolerance},
           {"init_scale", cfg.init_scale},
           {"accelerated", cfg.accelerated},
           {"stagnation_tolerance", cfg.stagnation_tolerance},
           {"stagnation_window", cfg.stagnation_window},
           {"relu_schedule",
            cfg.relu_schedule == ReluSchedule::backtracking ? "backtracking" : "diminishing"}};
    if (cfg.step_size) {
        j["step_size"] = *cfg.step_size;
    } else {
        j["step_size"] = "auto";
    }
    return j;
}

// Target and datasets for one data seed, drawn from disjoint streams.
struct Problem {
    GenConfig gen;
    NetworkParams target;
    Dataset train;
    std::optional<Dataset> test;
};

Problem make_problem(const DataSection& data, std::uint64_t seed, bool with_test) {
    const GenConfig gen = data.gen_config(seed);
    NetworkParams target = sample_target(gen);
    Dataset train = sample_dataset(target, gen, StreamRole::train);
    std::optional<Dataset> test;
    if (with_test) {
        GenConfig test_gen = gen;
        test_gen.n = data.n_test;
        test.emplace(sample_dataset(target, test_gen, StreamRole::test));
    }
    return {gen, std::move(target), std::move(train), std::move(test)};
}

Dataset population_sample(const Problem& problem) {
    GenConfig gen = problem.gen;
    gen.n = kPopulationSampleSize;
    return sample_dataset(problem.target, gen, StreamRole::verify);
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_real(double v) { return std::isfinite(v) ? format_real(v) : ""; }

} // namespace

std::uint64_t restart_seed_base(std::uint64_t data_seed) { return data_seed << 10; }

Table1Outcome compare_runs(const std::vector<TrainResult>& runs, const Dataset& train,
                           const Dataset& test, const NetworkParams& target,
                           const Dataset& population) {
    Table1Outcome out;
    out.records.reserve(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const TrainResult& run = runs[i];
        ExperimentRecord rec;
        rec.run_id = i;
        rec.seed = run.seed;
        rec.final_objective = run.final_objective;
        rec.train_error = empirical_risk(run.params, train);
        rec.test_error = empirical_risk(run.params, test);
        rec.population_risk = train.activation() == Activation::linear
                                  ? population_risk(run.params, target, train.sigma())
                                  : empirical_risk(run.params, population);
        rec.kkt_residual = run.final_kkt_residual;
        rec.converged = run.converged;
        out.records.push_back(rec);
    }

    std::optional<std::size_t> best;
    std::optional<std::size_t> worst;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        const ExperimentRecord& rec = out.records[i];
        if (!rec.converged) continue;
        ++out.converged;
        if (!best || rec.train_error < out.records[*best].train_error) best = i;
        if (!worst || rec.train_error > out.records[*worst].train_error) worst = i;
    }
    if (out.converged < 2) {
        throw ExperimentError("only " + std::to_string(out.converged) +
                              " run(s) converged; the comparison needs at least 2");
    }
    out.best = *best;
    out.worst = *worst;
    const ExperimentRecord ref = out.records[out.best];
    for (ExperimentRecord& rec : out.records) {
        rec.relative_train_error = rec.train_error / ref.train_error;
        rec.relative_test_error = rec.test_error / ref.test_error;
    }
    return out;
}

int cmd_gen(const CommandOptions& opts) {
    ConfigReader reader = ConfigReader::load(opts.config);
    const DataSection data = read_data_section(reader, true, true);
    reader.finish();

    const Problem problem = make_problem(data, data.seed, true);
    json meta{{"target", problem.target}, {"config", problem.gen}};
    meta["config"]["n_test"] = data.n_test;
    stamp(meta, opts);
    write_json(opts.out / "target.json", meta);
    write_dataset_csv(problem.train, opts.out / "train.csv");
    write_dataset_csv(*problem.test, opts.out / "test.csv");
    return kExitOk;
}

int cmd_train(const CommandOptions& opts) {
    ConfigReader reader = ConfigReader::load(opts.config);
    const DataSection data = read_data_section(reader, false, true);
    const int restarts = read_count(reader, "restarts", 5, 2);
    const double r = read_penalty(reader, static_cast<std::size_t>(data.n_train),
                                  static_cast<std::size_t>(data.w), static_cast<std::size_t>(data.d));
    TrainConfig tcfg = read_train_section(reader);
    reader.finish();

    const Problem problem = make_problem(data, data.seed, false);
    tcfg.seed = restart_seed_base(data.seed);
    const std::vector<TrainResult> runs =
        multi_start(problem.train, data.w, r, tcfg, restarts, opts.threads);

    json out{{"config", problem.gen}, {"train", train_config_json(tcfg)}, {"r", r},
             {"restarts", restarts}};
    json entries = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const TrainResult& run = runs[i];
        json entry = run;
        entry["rank"] = i;
        entry["train_error"] = empirical_risk(run.params, problem.train);
        if (data.activation == Activation::linear) {
            entry["population_risk"] = population_risk(run.params, problem.target, data.sigma);
        }
        entry["reasonable"] = is_reasonable(run.params, static_cast<std::size_t>(data.n_train));
        entries.push_back(std::move(entry));
        write_trace_csv(run, opts.out / "traces" / ("run_" + std::to_string(run.seed) + ".csv"));
    }
    out["runs"] = std::move(entries);
    out["diverged"] = restarts - static_cast<int>(runs.size());
    stamp(out, opts);
    write_json(opts.out / "runs.json", out);
    return kExitOk;
}

int cmd_table1(const CommandOptions& opts) {
    ConfigReader reader = ConfigReader::load(opts.config);
    const DataSection data = read_data_section(reader, true, false);
    std::vector<Activation> activations{Activation::linear, Activation::relu};
    if (reader.has("activations")) {
        const json& list = reader.raw("activations");
        if (!list.is_array() || list.empty()) reader.fail("'activations' must be a non-empty array");
        activations.clear();
        for (const json& item : list) {
            if (!item.is_string()) reader.fail("'activations' entries must be strings");
            try {
                activations.push_back(parse_activation(item.get<std::string>()));
            } catch (const UnsupportedActivationError& e) {
                reader.fail(e.what());
            }
        }
    }
    const int restarts = read_count(reader, "restarts", 10, 2);
    const int sweep = read_count(reader, "sweep_seeds", 10, 0);
    const double r = read_penalty(reader, static_cast<std::size_t>(data.n_train),
                                  static_cast<std::size_t>(data.w), static_cast<std::size_t>(data.d));
    TrainConfig tcfg = read_train_section(reader);
    reader.finish();

    auto run_protocol = [&](Activation act, std::uint64_t seed) {
        DataSection section = data;
        section.activation = act;
        const Problem problem = make_problem(section, seed, true);
        TrainConfig cfg = tcfg;
        cfg.seed = restart_seed_base(seed);
        const std::vector<TrainResult> runs =
            multi_start(problem.train, data.w, r, cfg, restarts, opts.threads);
        return compare_runs(runs, problem.train, *problem.test, problem.target,
                            population_sample(problem));
    };

    std::string table = "activation,role,train_error,test_error,relative_train_error,"
                        "relative_test_error\n";
    std::string run_rows = "activation,run_id,seed,final_objective,train_error,test_error,"
                           "population_risk,kkt_residual,converged,relative_train_error,"
                           "relative_test_error\n";
    std::string sweep_rows = "seed,activation,converged_runs,relative_train_error,"
                             "relative_test_error\n";
    json summary{{"config", data.gen_config(data.seed)},
                 {"n_test", data.n_test},
                 {"train", train_config_json(tcfg)},
                 {"r", r},
                 {"restarts", restarts},
                 {"sweep_seeds", sweep}};
    summary["config"].erase("activation");

    for (Activation act : activations) {
        const std::string name(to_string(act));
        const Table1Outcome outcome = run_protocol(act, data.seed);
        for (const auto& [role, index] : {std::pair{"best", outcome.best}, {"worst", outcome.worst}}) {
            const ExperimentRecord& rec = outcome.records[index];
            table += name + ',' + role + ',' + format_real(rec.train_error) + ',' +
                     format_real(rec.test_error) + ',' + format_real(rec.relative_train_error) +
                     ',' + format_real(rec.relative_test_error) + '\n';
        }
        for (const ExperimentRecord& rec : outcome.records) {
            run_rows += name + ',' + std::to_string(rec.run_id) + ',' + std::to_string(rec.seed) +
                        ',' + format_real(rec.final_objective) + ',' +
                        format_real(rec.train_error) + ',' + format_real(rec.test_error) + ',' +
                        format_real(rec.population_risk) + ',' + format_real(rec.kkt_residual) +
                        ',' + (rec.converged ? "true" : "false") + ',' +
                        format_real(rec.relative_train_error) + ',' +
                        format_real(rec.relative_test_error) + '\n';
        }

        std::vector<double> train_ratios;
        std::vector<double> test_ratios;
        int insufficient = 0;
        for (int s = 0; s < sweep; ++s) {
            const std::uint64_t seed = data.seed + 1 + static_cast<std::uint64_t>(s);
            double train_ratio = std::numeric_limits<double>::quiet_NaN();
            double test_ratio = train_ratio;
            std::size_t converged = 0;
            try {
                const Table1Outcome swept = run_protocol(act, seed);
                converged = swept.converged;
                train_ratio = swept.records[swept.worst].relative_train_error;
                test_ratio = swept.records[swept.worst].relative_test_error;
                train_ratios.push_back(train_ratio);
                test_ratios.push_back(test_ratio);
            } catch (const ExperimentError&) {
                ++insufficient;
            }
            sweep_rows += std::to_string(seed) + ',' + name + ',' + std::to_string(converged) +
                          ',' + csv_real(train_ratio) + ',' + csv_real(test_ratio) + '\n';
        }

        const ExperimentRecord& worst = outcome.records[outcome.worst];
        auto stats = [](const std::vector<double>& v) {
            if (v.empty()) return json{{"min", nullptr}, {"median", nullptr}, {"max", nullptr}};
            return json{{"min", *std::min_element(v.begin(), v.end())},
                        {"median", median(v)},
                        {"max", *std::max_element(v.begin(), v.end())}};
        };
        summary["results"][name] = {
            {"converged_runs", outcome.converged},
            {"best_seed", outcome.records[outcome.best].seed},
            {"worst_seed", worst.seed},
            {"relative_train_error", worst.relative_train_error},
            {"relative_test_error", worst.relative_test_error},
            {"sweep",
             {{"completed", train_ratios.size()},
              {"insufficient_convergence", insufficient},
              {"relative_train_error", stats(train_ratios)},
              {"relative_test_error", stats(test_ratios)}}}};
    }
    stamp(summary, opts);

    write_text_file(opts.out / "table1.csv", table);
    write_text_file(opts.out / "table1_runs.csv", run_rows);
    write_text_file(opts.out / "table1_sweep.csv", sweep_rows);
    write_json(opts.out / "table1_summary.json", summary);
    return kExitOk;
}

int cmd_theorem1(const CommandOptions& opts) {
    ConfigReader reader = ConfigReader::load(opts.config);
    const DataSection data = read_data_section(reader, false, false);
    const int trials = read_count(reader, "trials", 20, 1);
    const int restarts = read_count(reader, "restarts", 5, 2);
    const double nu = reader.optional<double>("nu", 1.0);
    const double r = read_penalty(reader, static_cast<std::size_t>(data.n_train),
                                  static_cast<std::size_t>(data.w), static_cast<std::size_t>(data.d));
    TrainConfig tcfg = read_train_section(reader);
    reader.finish();

    const auto n = static_cast<std::size_t>(data.n_train);
    struct Trial {
        std::optional<BoundCheck> first;
        std::optional<BoundCheck> second;
        double raw_gap = std::numeric_limits<double>::quiet_NaN();
        std::size_t converged = 0;
    };
    std::vector<Trial> results(static_cast<std::size_t>(trials));
    // Trials run on the pool; the restarts inside each trial run serially so
    // the work split never depends on the thread count.
    parallel_for(results.size(), opts.threads, [&](std::size_t t) {
        const std::uint64_t seed = data.seed + t;
        const Problem problem = make_problem(data, seed, false);
        TrainConfig cfg = tcfg;
        cfg.seed = restart_seed_base(seed);
        const std::vector<TrainResult> runs = multi_start(problem.train, data.w, r, cfg, restarts, 1);
        Trial& trial = results[t];
        const auto worst = worst_converged(runs);
        for (const TrainResult& run : runs) trial.converged += run.converged ? 1 : 0;
        if (!worst) return;
        // runs are sorted by objective, so the first converged run is the best one.
        const auto best = std::find_if(runs.begin(), runs.end(),
                                       [](const TrainResult& run) { return run.converged; });
        const NetworkParams& stationary = runs[*worst].params;
        trial.first = check_theorem1(problem.target, stationary, r, n, data.sigma);
        trial.second = check_theorem2(problem.target, runs.back().params, best->params,
                                      problem.train, r, n, data.sigma);
        trial.raw_gap = trial.first->lhs - population_risk(problem.target, problem.target, data.sigma);
    });

    std::string first_rows = bound_csv_header();
    std::string second_rows = bound_csv_header();
    std::vector<double> first_slack;
    std::vector<double> second_slack;
    std::vector<double> gaps;
    int first_holds = 0;
    int second_holds = 0;
    int unconverged = 0;
    int unreasonable = 0;
    for (std::size_t t = 0; t < results.size(); ++t) {
        const Trial& trial = results[t];
        if (!trial.first) {
            // Counted as a failed trial: there is no stationary point to check.
            ++unconverged;
            first_rows += std::to_string(t) + ",,,false,\n";
            second_rows += std::to_string(t) + ",,,false,\n";
            continue;
        }
        first_rows += bound_csv_row(t, *trial.first);
        second_rows += bound_csv_row(t, *trial.second);
        first_slack.push_back(trial.first->slack);
        second_slack.push_back(trial.second->slack);
        gaps.push_back(trial.raw_gap);
        first_holds += trial.first->holds ? 1 : 0;
        second_holds += trial.second->holds ? 1 : 0;
        unreasonable += trial.first->reasonable ? 0 : 1;
    }

    const double threshold = 2.5 * r * std::sqrt(std::log(static_cast<double>(n)));
    const double gap = median(gaps);
    json summary{{"config", data.gen_config(data.seed)},
                 {"train", train_config_json(tcfg)},
                 {"trials", trials},
                 {"restarts", restarts},
                 {"r", r},
                 {"nu", nu},
                 {"trials_without_converged_run", unconverged},
                 {"unreasonable_points", unreasonable},
                 {"theorem1",
                  {{"hold_fraction", static_cast<double>(first_holds) / trials},
                   {"median_slack", nullable(median(first_slack))}}},
                 {"theorem2",
                  {{"hold_fraction", static_cast<double>(second_holds) / trials},
                   {"median_slack", nullable(median(second_slack))}}},
                 {"median_raw_risk_gap", nullable(gap)},
                 {"raw_gap_threshold", threshold},
                 {"raw_gap_below_threshold", std::isfinite(gap) && gap < threshold}};
    summary["config"].erase("activation");
    stamp(summary, opts);

    write_text_file(opts.out / "bounds.csv", first_rows);
    write_text_file(opts.out / "bounds_theorem2.csv", second_rows);
    write_json(opts.out / "theorem1_summary.json", summary);
    return kExitOk;
}

int cmd_verify(const CommandOptions& opts) {
    ConfigReader reader = ConfigReader::load(opts.config);
    VerifyConfig cfg;
    cfg.seed = reader.require<std::uint64_t>("seed");
    cfg.gradient_instances = reader.optional<int>("gradient_instances", cfg.gradient_instances);
    cfg.hessian_instances = reader.optional<int>("hessian_instances", cfg.hessian_instances);
    cfg.prop1_instances = reader.optional<int>("prop1_instances", cfg.prop1_instances);
    cfg.prop1_alpha_draws = reader.optional<int>("prop1_alpha_draws", cfg.prop1_alpha_draws);
    cfg.segment_instances = reader.optional<int>("segment_instances", cfg.segment_instances);
    cfg.segment_grid = reader.optional<int>("segment_grid", cfg.segment_grid);
    cfg.invariance_instances =
        reader.optional<int>("invariance_instances", cfg.invariance_instances);
    reader.finish();
    try {
        cfg.validate();
    } catch (const PreconditionError& e) {
        reader.fail(e.what());
    }

    const std::vector<SuiteResult> suites = run_property_suite(cfg, opts.threads);
    const bool passed = std::all_of(suites.begin(), suites.end(),
                                    [](const SuiteResult& s) { return s.passed; });
    json report{{"seed", cfg.seed}, {"suites", suites}, {"passed", passed}};
    stamp(report, opts);
    write_json(opts.out / "verify.json", report);
    return passed ? kExitOk : kExitVerification;
}

} // namespace statnet
