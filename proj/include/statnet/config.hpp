#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include "json.hpp"

#include "statnet/datagen.hpp"
#include "statnet/error.hpp"
#include "statnet/optimizer.hpp"

namespace statnet {

/// Strict reader over a flat JSON config object. Every key must be consumed
/// through require/optional before finish(), which rejects leftovers.
class ConfigReader {
public:
    ConfigReader(nlohmann::json root, std::string source);

    /// Parses text, reporting syntax errors with line and column.
    static ConfigReader parse(const std::string& text, const std::string& source);
    static ConfigReader load(const std::filesystem::path& path);

    template <typename T>
    T require(const std::string& key) {
        if (!root_.contains(key)) fail("missing required field '" + key + "'");
        return get<T>(key);
    }

    template <typename T>
    T optional(const std::string& key, T fallback) {
        if (!root_.contains(key)) return fallback;
        return get<T>(key);
    }

    bool has(const std::string& key) const { return root_.contains(key); }
    const nlohmann::json& raw(const std::string& key);

    void finish() const;

    [[noreturn]] void fail(const std::string& message) const;

private:
    template <typename T>
    T get(const std::string& key) {
        seen_.insert(key);
        try {
            return root_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            fail("field '" + key + "' has the wrong type");
        }
    }

    nlohmann::json root_;
    std::string source_;
    std::set<std::string> seen_;
};

/// Data-generation fields shared by every command.
struct DataSection {
    std::uint64_t seed = 0;
    Eigen::Index w = 10;
    Eigen::Index d = 10;
    Eigen::Index n_train = 500;
    Eigen::Index n_test = 300;
    double sigma = 0.5;
    double sparsity = 0.3;
    Activation activation = Activation::linear;

    GenConfig gen_config(std::uint64_t seed_override) const;
};

/// Reads seed, w, d, n_train, sigma, sparsity (required); n_test and
/// activation when `with_test` / `with_activation`. Without `with_test`,
/// n_test is still accepted so one file can drive several commands.
DataSection read_data_section(ConfigReader& reader, bool with_test, bool with_activation);

/// Optimizer fields: max_iters, step_size ("auto" or number), kkt_tolerance,
/// init_scale, accelerated, stagnation_tolerance, stagnation_window,
/// relu_schedule ("backtracking" or "diminishing"). All optional.
TrainConfig read_train_section(ConfigReader& reader);

/// Reads 'r' (number or "oracle", default "oracle") and 'nu' (default 1).
double read_penalty(ConfigReader& reader, std::size_t n, std::size_t w, std::size_t d);

} // namespace statnet
