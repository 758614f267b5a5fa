// Command-line driver: `forecast` runs the end-to-end pipeline on a frame
// directory or scenario file; `synth` renders a synthetic scenario; `version`
// prints the library version.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include "skydmd/skydmd.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"Sky-image DMD clear-sky-index forecaster"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* forecast = app.add_subcommand("forecast", "Run the forecast pipeline");
    forecast->add_option("--config", config_path, "Run configuration JSON file")->required();

    std::string scenario_path, out_dir;
    std::uint64_t seed = 0;
    CLI::App* synth = app.add_subcommand("synth", "Render a synthetic scenario");
    synth->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    synth->add_option("--seed", seed, "Random seed")->required();
    synth->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* version = app.add_subcommand("version", "Print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (version->parsed()) {
        std::printf("skydmd %s\n", skydmd::kVersion);
        return 0;
    }
    if (forecast->parsed()) {
        const skydmd::RunConfig cfg =
            skydmd::parse_run_config(skydmd::load_json_file(config_path));
        const skydmd::ForecastReport report = skydmd::run_forecast_command(cfg);
        std::printf("wrote %zu forecast rows to %s\n", report.series.rows.size(),
                    cfg.output_dir.string().c_str());
        return 0;
    }
    skydmd::run_synth_command(scenario_path, seed, out_dir);
    std::printf("rendered scenario to %s\n", out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const skydmd::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const skydmd::data_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const skydmd::numeric_error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
