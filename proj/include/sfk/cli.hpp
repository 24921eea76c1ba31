#pragma once

#include "sfk/engine.hpp"
#include "sfk/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sfk
{

struct TaskOptions
{
    std::optional<double> epsilon; ///< classify: also run the empirical band check
    double lambda_tilde = 50.0;
    double d0 = 1.0;
    std::optional<std::vector<double>> phi_tilde; ///< couple: constant history of the second copy
    std::size_t audit_samples = 1000;
    std::optional<double> sampler_bound; ///< default 10 M
    std::uint64_t sampler_seed = 1;
    std::optional<double> lipschitz_D0;
    double lipschitz_d0 = 0.0;
};

struct ExperimentConfig
{
    std::string model_type;
    CatalogModel model;
    std::string task;
    SimConfig sim;
    std::string outputs = "out";
    std::size_t replicates = 1;
    std::optional<std::vector<double>> initial; ///< constant history
    TaskOptions options;
    std::string digest; ///< FNV-1a of the canonical config text
};

/// Parses and fully validates a config document, including the model
/// parameters and noise. Throws Error{ConfigInvalid} with the message
/// "<field>: <reason>".
ExperimentConfig parse_config(const std::string& text);

struct RunOptions
{
    std::optional<std::string> out_dir;
    std::size_t workers = 1;
};

struct RunOutcome
{
    std::string summary;
    std::vector<std::string> artifacts;
};

/// Executes the task and writes its artifacts into the output directory.
/// Library errors propagate.
RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Catalog listing: name, parameters and constraints per model.
std::string list_models_text();
std::string list_models_json();

} // namespace sfk
