#include "statnet/config.hpp"

#include <algorithm>
#include <cmath>

#include "statnet/text_io.hpp"

namespace statnet {

namespace {

std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

} // namespace

ConfigReader::ConfigReader(nlohmann::json root, std::string source)
    : root_(std::move(root)), source_(std::move(source)) {
    if (!root_.is_object()) fail("top level must be a JSON object");
}

ConfigReader ConfigReader::parse(const std::string& text, const std::string& source) {
    try {
        return {nlohmann::json::parse(text), source};
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, column] = line_and_column(text, e.byte);
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(column) +
                          ": malformed JSON (" + e.what() + ")");
    }
}

ConfigReader ConfigReader::load(const std::filesystem::path& path) {
    return parse(read_text_file(path), path.string());
}

const nlohmann::json& ConfigReader::raw(const std::string& key) {
    if (!root_.contains(key)) fail("missing required field '" + key + "'");
    seen_.insert(key);
    return root_.at(key);
}

void ConfigReader::finish() const {
    for (const auto& item : root_.items()) {
        if (!seen_.contains(item.key())) fail("unknown field '" + item.key() + "'");
    }
}

void ConfigReader::fail(const std::string& message) const {
    throw ConfigError(source_ + ": " + message);
}

GenConfig DataSection::gen_config(std::uint64_t seed_override) const {
    GenConfig cfg;
    cfg.w = w;
    cfg.d = d;
    cfg.n = n_train;
    cfg.sigma = sigma;
    cfg.sparsity = sparsity;
    cfg.seed = seed_override;
    cfg.activation = activation;
    return cfg;
}

DataSection read_data_section(ConfigReader& reader, bool with_test, bool with_activation) {
    DataSection out;
    out.seed = reader.require<std::uint64_t>("seed");
    out.w = reader.require<Eigen::Index>("w");
    out.d = reader.require<Eigen::Index>("d");
    out.n_train = reader.require<Eigen::Index>("n_train");
    out.n_test = with_test ? reader.require<Eigen::Index>("n_test")
                           : reader.optional<Eigen::Index>("n_test", out.n_test);
    out.sigma = reader.require<double>("sigma");
    out.sparsity = reader.require<double>("sparsity");
    if (with_activation) {
        try {
            out.activation = parse_activation(reader.require<std::string>("activation"));
        } catch (const UnsupportedActivationError& e) {
            reader.fail(e.what());
        }
    }
    if (out.w < 1 || out.d < 1) reader.fail("'w' and 'd' must be at least 1");
    if (out.n_train < 2) reader.fail("'n_train' must be at least 2");
    if (with_test && out.n_test < 1) reader.fail("'n_test' must be at least 1");
    if (!(out.sigma >= 0.0)) reader.fail("'sigma' must be nonnegative");
    if (!(out.sparsity > 0.0 && out.sparsity <= 1.0)) reader.fail("'sparsity' must lie in (0, 1]");
    return out;
}

TrainConfig read_train_section(ConfigReader& reader) {
    TrainConfig cfg;
    cfg.max_iters = reader.optional<int>("max_iters", cfg.max_iters);
    if (reader.has("step_size")) {
        const auto& step = reader.raw("step_size");
        if (step.is_string() && step.get<std::string>() == "auto") {
            cfg.step_size.reset();
        } else if (step.is_number()) {
            cfg.step_size = step.get<double>();
        } else {
            reader.fail("field 'step_size' must be \"auto\" or a number");
        }
    }
    cfg.kkt_tolerance = reader.optional<double>("kkt_tolerance", cfg.kkt_tolerance);
    cfg.init_scale = reader.optional<double>("init_scale", cfg.init_scale);
    cfg.accelerated = reader.optional<bool>("accelerated", cfg.accelerated);
    cfg.stagnation_tolerance =
        reader.optional<double>("stagnation_tolerance", cfg.stagnation_tolerance);
    cfg.stagnation_window = reader.optional<int>("stagnation_window", cfg.stagnation_window);
    const auto schedule = reader.optional<std::string>("relu_schedule", "backtracking");
    if (schedule == "backtracking") {
        cfg.relu_schedule = ReluSchedule::backtracking;
    } else if (schedule == "diminishing") {
        cfg.relu_schedule = ReluSchedule::diminishing;
    } else {
        reader.fail("field 'relu_schedule' must be \"backtracking\" or \"diminishing\"");
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        reader.fail(e.what());
    }
    return cfg;
}

double read_penalty(ConfigReader& reader, std::size_t n, std::size_t w, std::size_t d) {
    const double nu = reader.optional<double>("nu", 1.0);
    if (!(nu > 0.0) || !std::isfinite(nu)) reader.fail("'nu' must be positive");
    if (!reader.has("r")) return oracle_tuning(n, w, d, nu);
    const auto& r = reader.raw("r");
    if (r.is_string() && r.get<std::string>() == "oracle") return oracle_tuning(n, w, d, nu);
    if (!r.is_number()) reader.fail("field 'r' must be \"oracle\" or a number");
    const double value = r.get<double>();
    if (!(value >= 0.0) || !std::isfinite(value)) reader.fail("'r' must be nonnegative");
    return value;
}

} // namespace statnet
