#include "sfk/cli.hpp"
#include "sfk/error.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace
{

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw sfk::Error(sfk::ErrorCode::ConfigInvalid, "config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void configure_logging()
{
    const char* level = std::getenv("SFK_LOG");
    const std::string name = level ? level : "info";
    if (name == "error")
        spdlog::set_level(spdlog::level::err);
    else if (name == "debug")
        spdlog::set_level(spdlog::level::debug);
    else
        spdlog::set_level(spdlog::level::info);
}

int execute(const std::string& config_path, const std::optional<std::string>& task_override,
            const sfk::RunOptions& options)
{
    auto config = sfk::parse_config(read_text(config_path));
    if (task_override)
        config.task = *task_override;
    spdlog::info("{}: task {} (config {})", config.model_type, config.task, config.digest);
    const auto outcome = sfk::run_experiment(config, options);
    for (const auto& artifact : outcome.artifacts)
        spdlog::debug("wrote {}", artifact);
    std::cout << outcome.summary << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    configure_logging();

    CLI::App app{"Persistence analysis for stochastic functional Kolmogorov systems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::size_t workers = 1;
    bool as_json = false;

    auto* run = app.add_subcommand("run", "Run the task described by a JSON config");
    run->add_option("config", config_path, "Config file")->required();
    auto* run_out = run->add_option("--out", out_dir, "Output directory (overrides the config)");
    run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    auto* list = app.add_subcommand("list-models", "List catalog models and their constraints");
    list->add_flag("--json", as_json, "Emit JSON");

    auto* compare = app.add_subcommand("compare-thresholds", "Compare analytic and simulated thresholds");
    compare->add_option("config", config_path, "Config file")->required();
    auto* compare_out = compare->add_option("--out", out_dir, "Output directory (overrides the config)");
    compare->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        if (*list)
        {
            std::cout << (as_json ? sfk::list_models_json() + "\n" : sfk::list_models_text());
            return 0;
        }
        sfk::RunOptions options;
        options.workers = workers;
        if (*run_out || *compare_out)
            options.out_dir = out_dir;
        if (*compare)
            return execute(config_path, std::string("thresholds"), options);
        return execute(config_path, std::nullopt, options);
    }
    catch (const sfk::Error& e)
    {
        spdlog::error("{}", e.what());
        return e.code() == sfk::ErrorCode::ConfigInvalid ? 2 : 1;
    }
    catch (const std::exception& e)
    {
        spdlog::error("{}", e.what());
        return 1;
    }
}
