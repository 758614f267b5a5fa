#pragma once

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "skydmd/core.hpp"
#include "skydmd/forecast.hpp"
#include "skydmd/image_io.hpp"
#include "skydmd/synth.hpp"

namespace skydmd {

inline constexpr const char* kVersion = "1.0.0";

/// Everything a forecast run needs: where the frames come from, the pipeline
/// parameters, and where results go.
struct RunConfig {
    std::filesystem::path input;      // frame directory or scenario JSON file
    std::optional<double> dt;         // required for frame directories
    PipelineParams params;
    std::filesystem::path output_dir;
    bool emit_frames = false;
};

namespace detail {

template <typename T>
inline T json_get(const nlohmann::json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config field has wrong type: " + key);
    }
}

template <typename T>
inline T json_require(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw config_error("missing required config field: " + key);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config field has wrong type: " + key);
    }
}

inline void reject_unknown_keys(const nlohmann::json& j,
                                const std::vector<std::string>& known,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw config_error("unknown " + where + " field: " + it.key());
}

inline std::string format_fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace detail

/// Parses a JSON document from disk; malformed JSON is a config error.
inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open file: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

/// Parses a run configuration document. Unset parameters take their
/// documented defaults; unknown keys are rejected.
inline RunConfig parse_run_config(const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("run config must be a JSON object");
    detail::reject_unknown_keys(
        j,
        {"input", "dt", "r", "window", "augment_levels", "hs_alpha", "hs_iterations",
         "disk_quantile", "inset_quantile", "glare_radius", "output_dir", "emit_frames"},
        "run config");
    RunConfig cfg;
    cfg.input = detail::json_require<std::string>(j, "input");
    if (j.contains("dt")) {
        cfg.dt = detail::json_require<double>(j, "dt");
        if (*cfg.dt <= 0.0) throw config_error("dt must be positive");
    }
    cfg.params.r = detail::json_get<int>(j, "r", cfg.params.r);
    cfg.params.window = detail::json_get<int>(j, "window", cfg.params.window);
    cfg.params.augment_levels =
        detail::json_get<int>(j, "augment_levels", cfg.params.augment_levels);
    cfg.params.hs_alpha = detail::json_get<double>(j, "hs_alpha", cfg.params.hs_alpha);
    cfg.params.hs_iterations =
        detail::json_get<int>(j, "hs_iterations", cfg.params.hs_iterations);
    cfg.params.disk_quantile =
        detail::json_get<double>(j, "disk_quantile", cfg.params.disk_quantile);
    cfg.params.inset_quantile =
        detail::json_get<double>(j, "inset_quantile", cfg.params.inset_quantile);
    cfg.params.glare_radius =
        detail::json_get<int>(j, "glare_radius", cfg.params.glare_radius);
    cfg.output_dir = detail::json_require<std::string>(j, "output_dir");
    cfg.emit_frames = detail::json_get<bool>(j, "emit_frames", false);
    cfg.params.validate();
    return cfg;
}

/// Parses a synthetic-scenario document (same key-value format as run
/// configs).
inline SynthScenario parse_scenario(const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("scenario must be a JSON object");
    detail::reject_unknown_keys(j,
                                {"height", "width", "steps", "dt", "disk", "blobs",
                                 "glare_amplitude", "noise_amplitude"},
                                "scenario");
    SynthScenario sc;
    sc.height = detail::json_require<int>(j, "height");
    sc.width = detail::json_require<int>(j, "width");
    sc.steps = detail::json_require<int>(j, "steps");
    sc.dt = detail::json_require<double>(j, "dt");

    const nlohmann::json dj = detail::json_require<nlohmann::json>(j, "disk");
    if (!dj.is_object()) throw config_error("scenario disk must be an object");
    detail::reject_unknown_keys(dj, {"row", "col", "radius", "brightness"}, "disk");
    sc.disk.row = detail::json_require<double>(dj, "row");
    sc.disk.col = detail::json_require<double>(dj, "col");
    sc.disk.radius = detail::json_require<double>(dj, "radius");
    sc.disk.brightness = detail::json_get<double>(dj, "brightness", 0.0);

    if (j.contains("blobs")) {
        const nlohmann::json bl = j.at("blobs");
        if (!bl.is_array()) throw config_error("scenario blobs must be an array");
        for (const nlohmann::json& bj : bl) {
            if (!bj.is_object()) throw config_error("each blob must be an object");
            detail::reject_unknown_keys(bj,
                                        {"row", "col", "sigma", "amplitude", "vel_row",
                                         "vel_col", "law", "rate", "period"},
                                        "blob");
            BlobSpec b;
            b.row = detail::json_require<double>(bj, "row");
            b.col = detail::json_require<double>(bj, "col");
            b.sigma = detail::json_require<double>(bj, "sigma");
            b.amplitude = detail::json_require<double>(bj, "amplitude");
            b.vel_row = detail::json_get<double>(bj, "vel_row", 0.0);
            b.vel_col = detail::json_get<double>(bj, "vel_col", 0.0);
            const std::string law = detail::json_get<std::string>(bj, "law", "constant");
            if (law == "constant") {
                b.law = amplitude_law::constant;
            } else if (law == "exponential") {
                b.law = amplitude_law::exponential;
                b.rate = detail::json_require<double>(bj, "rate");
            } else if (law == "sin_lobe") {
                b.law = amplitude_law::sin_lobe;
                b.period = detail::json_require<double>(bj, "period");
                if (b.period <= 0.0) throw config_error("sin_lobe period must be positive");
            } else {
                throw config_error("unknown blob amplitude law: " + law);
            }
            sc.blobs.push_back(b);
        }
    }
    sc.glare_amplitude = detail::json_get<double>(j, "glare_amplitude", 0.0);
    sc.noise_amplitude = detail::json_get<double>(j, "noise_amplitude", 0.0);
    sc.validate();
    return sc;
}

/// Loads a directory of grayscale frames (PGM/PNG) in lexicographic filename
/// order, scaled to [0,1].
inline FrameSequence load_sequence(const std::filesystem::path& dir, double dt) {
    if (dt <= 0.0) throw config_error("dt must be positive");
    if (!std::filesystem::is_directory(dir))
        throw data_error("input is not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".pgm" || ext == ".png") files.push_back(entry.path());
    }
    if (files.empty()) throw data_error("no image frames in directory: " + dir.string());
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
        return a.filename().string() < b.filename().string();
    });
    FrameSequence seq;
    seq.dt = dt;
    for (const auto& f : files) {
        Image img = read_image(f);
        if (!seq.frames.empty() && (img.rows() != seq.frames.front().rows() ||
                                    img.cols() != seq.frames.front().cols()))
            throw data_error("frames have mixed sizes: " + f.string());
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

/// Run-level summary statistics of a forecast series.
struct SummaryStats {
    std::optional<int> dmd_detection_step;
    std::optional<int> frozen_detection_step;
    double dmd_mean_abs_error = 0.0;
    double frozen_mean_abs_error = 0.0;
    double t_max_s = 0.0;
    WindEstimate wind;
};

inline SummaryStats compute_summary(const CsiSeries& series) {
    SummaryStats s;
    s.dmd_detection_step = first_detection_step(series.rows, &StepRow::dmd_k);
    s.frozen_detection_step = first_detection_step(series.rows, &StepRow::frozen_k);
    double dmd_err = 0.0, frozen_err = 0.0;
    for (const StepRow& row : series.rows) {
        dmd_err += std::abs(row.dmd_k - row.actual_k);
        frozen_err += std::abs(row.frozen_k - row.actual_k);
    }
    const double n = series.rows.empty() ? 1.0 : static_cast<double>(series.rows.size());
    s.dmd_mean_abs_error = dmd_err / n;
    s.frozen_mean_abs_error = frozen_err / n;
    s.t_max_s = series.t_max_s;
    s.wind = series.wind;
    return s;
}

/// Forecast run output: the full series plus its summary.
struct ForecastReport {
    CsiSeries series;
    SummaryStats summary;
};

/// Writes the per-step forecast table. Warnings within a row are joined with
/// ';' so the CSV stays single-line per step.
inline void write_forecast_csv(const CsiSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open file for writing: " + path.string());
    out << "step,time_s,actual_k,dmd_k,frozen_k,horizon_s,warnings\n";
    for (const StepRow& row : series.rows) {
        out << row.step << ',' << detail::format_fixed(row.time_s) << ','
            << detail::format_fixed(row.actual_k) << ',' << detail::format_fixed(row.dmd_k)
            << ',' << detail::format_fixed(row.frozen_k) << ','
            << detail::format_fixed(row.horizon_s) << ',';
        for (std::size_t i = 0; i < row.warnings.size(); ++i)
            out << (i ? ";" : "") << row.warnings[i];
        out << '\n';
    }
    if (!out) throw data_error("short write to CSV file: " + path.string());
}

inline nlohmann::json summary_to_json(const SummaryStats& s) {
    nlohmann::json j;
    j["first_detection_step"]["dmd"] =
        s.dmd_detection_step ? nlohmann::json(*s.dmd_detection_step) : nlohmann::json();
    j["first_detection_step"]["frozen_advection"] =
        s.frozen_detection_step ? nlohmann::json(*s.frozen_detection_step) : nlohmann::json();
    j["mean_abs_k_error"]["dmd"] = s.dmd_mean_abs_error;
    j["mean_abs_k_error"]["frozen_advection"] = s.frozen_mean_abs_error;
    j["t_max_s"] = s.t_max_s;
    j["wind"]["speed_px_per_step"] = s.wind.speed;
    j["wind"]["angle_rad"] = s.wind.angle;
    return j;
}

inline void write_text_file(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open file for writing: " + path.string());
    out << text;
    if (!out) throw data_error("short write to file: " + path.string());
}

/// Loads the configured input (scenario file or frame directory), runs the
/// pipeline, and writes forecast.csv, summary.json, and (optionally) one
/// composite forecast PNG per issue step into the output directory.
inline ForecastReport run_forecast_command(const RunConfig& cfg) {
    FrameSequence seq;
    if (std::filesystem::is_regular_file(cfg.input)) {
        if (cfg.dt)
            throw config_error("dt is taken from the scenario file for scenario inputs");
        const SynthScenario sc = parse_scenario(load_json_file(cfg.input));
        seq = generate(sc, 0).first;
    } else {
        if (!cfg.dt) throw config_error("dt is required for frame-directory inputs");
        seq = load_sequence(cfg.input, *cfg.dt);
    }

    ForecastReport report;
    report.series = run_pipeline(seq, cfg.params);
    report.summary = compute_summary(report.series);

    std::filesystem::create_directories(cfg.output_dir);
    write_forecast_csv(report.series, cfg.output_dir / "forecast.csv");
    write_text_file(summary_to_json(report.summary).dump(2) + "\n",
                    cfg.output_dir / "summary.json");
    if (cfg.emit_frames) {
        for (std::size_t i = 0; i < report.series.rows.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "forecast_step_%04d.png",
                          report.series.rows[i].step);
            write_png(report.series.dmd_composites[i], cfg.output_dir / name);
        }
    }
    return report;
}

inline nlohmann::json truth_to_json(const TruthRecord& truth, double dt) {
    nlohmann::json j;
    j["dt"] = dt;
    j["wind"]["speed_px_per_step"] = truth.wind_speed;
    j["wind"]["angle_rad"] = truth.wind_angle;
    j["k"] = truth.k;
    j["blob_states"] = nlohmann::json::array();
    for (const auto& step_states : truth.blob_states) {
        nlohmann::json row = nlohmann::json::array();
        for (const BlobState& st : step_states)
            row.push_back({{"row", st.row}, {"col", st.col}, {"amplitude", st.amplitude}});
        j["blob_states"].push_back(std::move(row));
    }
    return j;
}

/// Renders a scenario to 16-bit PGM frames plus truth.json in `out_dir`.
inline std::pair<FrameSequence, TruthRecord> run_synth_command(
    const std::filesystem::path& scenario_path, std::uint64_t seed,
    const std::filesystem::path& out_dir) {
    const SynthScenario sc = parse_scenario(load_json_file(scenario_path));
    auto [seq, truth] = generate(sc, seed);
    std::filesystem::create_directories(out_dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.pgm", i);
        write_pgm(seq.frames[i], out_dir / name);
    }
    write_text_file(truth_to_json(truth, sc.dt).dump(2) + "\n", out_dir / "truth.json");
    return {std::move(seq), std::move(truth)};
}

}  // namespace skydmd
