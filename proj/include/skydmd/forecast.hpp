#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "skydmd/core.hpp"
#include "skydmd/decomposition.hpp"
#include "skydmd/motion.hpp"
#include "skydmd/preprocessing.hpp"

namespace skydmd {

/// Margin added around each selected component's bounding box, px.
constexpr int kInsetMarginPx = 2;

/// Frame pairs sampled from the start of a sequence when estimating the
/// uniform wind in the pipeline; the horizon model assumes stationary wind,
/// so more pairs add cost without information.
constexpr int kWindEstimationPairs = 8;

/// Rectangular region of interest in cropped-frame coordinates, tied to the
/// sliding window it was selected from.
struct Inset {
    PixelBox box;
    int window_start = 0;  // 0-based index of the window's first frame
    int window_len = 8;    // M_m
};

/// One issued forecast: the clear-sky index expected when the inset reaches
/// the disk.
struct ForecastRecord {
    int issue_step = 0;        // 1-based step of the window's last frame
    double horizon_s = 0.0;
    double arrival_time_s = 0.0;
    double k_value = 1.0;
    std::string method;        // "dmd" or "frozen_advection"
    std::vector<std::string> warnings;
};

/// Clear-sky index of a frame: 1 - mean cloudiness over the disk mask,
/// clamped to [0,1].
inline double csi_of_frame(const Image& frame, const SolarDiskMask& disk) {
    if (frame.rows() != disk.mask.rows() || frame.cols() != disk.mask.cols())
        throw data_error("frame and disk mask shapes disagree");
    double sum = 0.0;
    long count = 0;
    for (int c = 0; c < frame.cols(); ++c) {
        for (int r = 0; r < frame.rows(); ++r) {
            if (!disk.mask(r, c)) continue;
            sum += frame(r, c);
            ++count;
        }
    }
    if (count == 0) throw data_error("empty disk mask");
    return clamp01(1.0 - sum / static_cast<double>(count));
}

/// Maximum forecast horizon for an upwind rectangle of width w px:
/// w * dt / speed.
inline double max_horizon(int width_px, double dt, const WindEstimate& wind) {
    if (wind.speed <= 0.0) throw data_error("zero wind speed: horizon undefined");
    return width_px * dt / wind.speed;
}

/// Selects forecast regions from a window of cropped frames: thresholds the
/// first POD mode at the energy quantile, takes connected-component bounding
/// boxes with a 2-px margin, and merges overlapping boxes. Returns an empty
/// list for a featureless (clear-sky) window.
inline std::vector<Inset> select_insets(const std::vector<Image>& window, double energy_quantile,
                                        int window_start = 0) {
    if (window.size() < 2) throw data_error("inset selection needs a window of >= 2 frames");
    FrameSequence slice;
    slice.frames = window;
    const SnapshotMatrix x = build_snapshot_matrix(slice);
    const PodResult pod = compute_pod(x);
    // A featureless (clear-sky) window holds no forecastable content.
    if (pod.singular_values(0) <= 1e-12) return {};
    const int h = static_cast<int>(window.front().rows());
    const int w = static_cast<int>(window.front().cols());
    const Image mode = first_pod_mode_image(pod, h, w);

    std::vector<double> values(mode.data(), mode.data() + mode.size());
    const double threshold = quantile(values, energy_quantile);
    const BoolMask above = mode.array() > threshold;
    if (!above.any()) return {};

    std::vector<PixelBox> boxes;
    for (const Component& comp : connected_components(above)) {
        PixelBox b = comp.box;
        b.row0 = std::max(0, b.row0 - kInsetMarginPx);
        b.col0 = std::max(0, b.col0 - kInsetMarginPx);
        b.row1 = std::min(h, b.row1 + kInsetMarginPx);
        b.col1 = std::min(w, b.col1 + kInsetMarginPx);
        boxes.push_back(b);
    }
    // Merge until pairwise non-overlapping (composite insets must not
    // double-count pixels).
    bool merged_any = true;
    while (merged_any) {
        merged_any = false;
        for (std::size_t i = 0; i < boxes.size() && !merged_any; ++i) {
            for (std::size_t j = i + 1; j < boxes.size(); ++j) {
                if (!boxes[i].overlaps(boxes[j])) continue;
                boxes[i] = boxes[i].merged(boxes[j]);
                boxes.erase(boxes.begin() + static_cast<long>(j));
                merged_any = true;
                break;
            }
        }
    }
    std::sort(boxes.begin(), boxes.end(), [](const PixelBox& a, const PixelBox& b) {
        return a.row0 != b.row0 ? a.row0 < b.row0 : a.col0 < b.col0;
    });

    std::vector<Inset> insets;
    for (const PixelBox& b : boxes)
        insets.push_back({b, window_start, static_cast<int>(window.size())});
    return insets;
}

namespace detail {

// Future inset content plus the bookkeeping needed to composite it.
struct InsetContent {
    Image content;                       // h x w future inset
    PixelBox box;                        // cropped-frame coordinates
    double t_s = 0.0;                    // arrival time, seconds
    double shift_px = 0.0;               // leftward advection distance
    std::vector<std::string> warnings;
};

// Arrival time of the inset's leading (left) edge at the disk center.
inline std::pair<double, double> arrival(const Inset& inset, int crop_offset,
                                         const SolarDiskMask& disk, const WindEstimate& wind,
                                         double dt, int cropped_width) {
    const double dist = std::max(0.0, crop_offset + inset.box.col0 - disk.col);
    const double t_s = dist / wind.speed * dt;
    if (t_s > max_horizon(cropped_width, dt, wind))
        throw data_error("inset arrival time beyond maximum horizon");
    return {t_s, dist};
}

// Extracts the inset's window sub-frames as an image-valued snapshot matrix.
inline SnapshotMatrix inset_snapshots(const CroppedSequence& cropped, const Inset& inset) {
    SnapshotMatrix x;
    const int h = inset.box.height(), w = inset.box.width();
    x.data.resize(static_cast<Eigen::Index>(h) * w, inset.window_len);
    for (int k = 0; k < inset.window_len; ++k) {
        const Image sub = cropped.seq.frames[static_cast<std::size_t>(inset.window_start + k)]
                              .block(inset.box.row0, inset.box.col0, h, w);
        x.data.col(k) = Eigen::Map<const Eigen::VectorXd>(sub.data(), sub.size());
    }
    x.dt = cropped.seq.dt;
    x.height = h;
    x.width = w;
    x.image_valued = true;
    return x;
}

// DMD-evolved future inset at arrival time.
inline InsetContent dmd_inset_content(const CroppedSequence& cropped, const Inset& inset,
                                      const WindEstimate& wind, const SolarDiskMask& disk,
                                      int r, int augment_levels) {
    InsetContent out;
    out.box = inset.box;
    auto [t_s, dist] = arrival(inset, cropped.col_offset, disk, wind, cropped.seq.dt,
                               cropped.seq.width());
    out.t_s = t_s;
    out.shift_px = dist;

    const SnapshotMatrix x = inset_snapshots(cropped, inset);
    const DmdModel model = compute_dmd(x, r, augment_levels, rank_policy::shrink);
    for (int i = 0; i < model.order; ++i) {
        if (model.exponents(i).real() * t_s > 3.0) {
            out.warnings.push_back("model extrapolation warning");
            break;
        }
    }
    const double t_eval = (inset.window_len - 1) * cropped.seq.dt + t_s;
    const Eigen::VectorXd future = evaluate_dmd(model, t_eval);
    out.content.resize(inset.box.height(), inset.box.width());
    Eigen::Map<Eigen::VectorXd>(out.content.data(), out.content.size()) = future;
    return out;
}

// Frozen-cloud future inset: the last observed frame, unchanged.
inline InsetContent frozen_inset_content(const CroppedSequence& cropped, const Inset& inset,
                                         const WindEstimate& wind, const SolarDiskMask& disk) {
    InsetContent out;
    out.box = inset.box;
    auto [t_s, dist] = arrival(inset, cropped.col_offset, disk, wind, cropped.seq.dt,
                               cropped.seq.width());
    out.t_s = t_s;
    out.shift_px = dist;
    out.content = cropped.seq.frames[static_cast<std::size_t>(
        inset.window_start + inset.window_len - 1)]
                      .block(inset.box.row0, inset.box.col0, inset.box.height(),
                             inset.box.width());
    return out;
}

// Advects inset content `shift_px` leftward (integer shift plus bilinear
// subpixel residual) onto a full-frame canvas.
inline void composite_content(Image& canvas, const InsetContent& ic, int crop_offset) {
    const int whole = static_cast<int>(std::floor(ic.shift_px));
    const double frac = ic.shift_px - whole;
    const int w = static_cast<int>(canvas.cols());
    for (int dx = 0; dx < ic.box.width(); ++dx) {
        const int target = crop_offset + ic.box.col0 + dx - whole;
        if (target >= 0 && target < w)
            canvas.block(ic.box.row0, target, ic.box.height(), 1) +=
                (1.0 - frac) * ic.content.col(dx);
        if (frac > 0.0 && target - 1 >= 0 && target - 1 < w)
            canvas.block(ic.box.row0, target - 1, ic.box.height(), 1) +=
                frac * ic.content.col(dx);
    }
}

inline ForecastRecord record_from_content(const InsetContent& ic, const Inset& inset,
                                          const SolarDiskMask& disk, int crop_offset,
                                          int full_height, int full_width,
                                          std::string method) {
    Image canvas = Image::Zero(full_height, full_width);
    composite_content(canvas, ic, crop_offset);
    clamp01_in_place(canvas);
    ForecastRecord rec;
    rec.issue_step = inset.window_start + inset.window_len;
    rec.horizon_s = ic.t_s;
    rec.arrival_time_s = ic.t_s;
    rec.k_value = csi_of_frame(canvas, disk);
    rec.method = std::move(method);
    rec.warnings = ic.warnings;
    return rec;
}

}  // namespace detail

/// DMD forecast for one inset: fits an augmented DMD over the window,
/// evaluates the future inset at arrival time t_s, advects it to the disk,
/// and scores the clear-sky index.
inline ForecastRecord dmd_inset_forecast(const CroppedSequence& cropped, const Inset& inset,
                                         const WindEstimate& wind, const SolarDiskMask& disk,
                                         int r = 3, int augment_levels = 1) {
    const detail::InsetContent ic =
        detail::dmd_inset_content(cropped, inset, wind, disk, r, augment_levels);
    return detail::record_from_content(ic, inset, disk, cropped.col_offset,
                                       static_cast<int>(disk.mask.rows()),
                                       static_cast<int>(disk.mask.cols()), "dmd");
}

/// Frozen-cloud baseline for one inset: advects the last observed inset
/// frame without modeling its evolution.
inline ForecastRecord frozen_advection_forecast(const CroppedSequence& cropped,
                                                const Inset& inset, const WindEstimate& wind,
                                                const SolarDiskMask& disk) {
    const detail::InsetContent ic = detail::frozen_inset_content(cropped, inset, wind, disk);
    return detail::record_from_content(ic, inset, disk, cropped.col_offset,
                                       static_cast<int>(disk.mask.rows()),
                                       static_cast<int>(disk.mask.cols()), "frozen_advection");
}

/// Tunable parameters of the end-to-end forecast pipeline.
struct PipelineParams {
    int r = 3;
    int window = 8;  // M_m
    int augment_levels = 1;
    double hs_alpha = 1.0;
    int hs_iterations = 100;
    double disk_quantile = 0.995;
    double inset_quantile = 0.95;
    int glare_radius = 5;

    void validate() const {
        if (r < 1) throw config_error("DMD order must be >= 1");
        if (window <= r + 1) throw config_error("window length must satisfy M_m > r + 1");
        if (augment_levels < 0) throw config_error("augment levels must be >= 0");
        if (hs_alpha <= 0.0) throw config_error("Horn-Schunck alpha must be positive");
        if (hs_iterations < 1) throw config_error("Horn-Schunck iterations must be >= 1");
        if (disk_quantile <= 0.0 || disk_quantile >= 1.0)
            throw config_error("disk threshold quantile must lie in (0,1)");
        if (inset_quantile <= 0.0 || inset_quantile >= 1.0)
            throw config_error("inset energy quantile must lie in (0,1)");
        if (glare_radius < 0) throw config_error("glare smoothing radius must be >= 0");
    }
};

/// One composite scoring row per issue step.
struct StepRow {
    int step = 0;          // 1-based
    double time_s = 0.0;   // (step - 1) * dt
    double actual_k = 1.0;
    double dmd_k = 1.0;
    double frozen_k = 1.0;
    double horizon_s = 0.0;
    std::vector<std::string> warnings;
};

/// Full pipeline output: per-step actuals, per-inset forecast records, and
/// the per-step composite rows plus run-level context.
struct CsiSeries {
    std::vector<double> times;
    std::vector<double> actual;
    std::vector<ForecastRecord> forecasts;
    std::vector<StepRow> rows;
    WindEstimate wind;
    double t_max_s = 0.0;
    SolarDiskMask disk;                 // in the rotated frame
    std::vector<Image> dmd_composites;  // one per issue step, for emit-frames
};

/// First step whose forecast K is at or above `threshold` and at least 90%
/// of the subsequent steps stay there (the dissolution-detection metric).
inline std::optional<int> first_detection_step(const std::vector<StepRow>& rows,
                                               double StepRow::*series,
                                               double threshold = 0.95) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].*series < threshold) continue;
        std::size_t good = 0, total = rows.size() - i - 1;
        for (std::size_t j = i + 1; j < rows.size(); ++j)
            if (rows[j].*series >= threshold) ++good;
        if (total == 0 || static_cast<double>(good) >= 0.9 * static_cast<double>(total))
            return rows[i].step;
    }
    return std::nullopt;
}

/// Runs preprocessing (disk removal), wind estimation, rotation, glare
/// removal, and the upwind crop, then issues DMD and frozen forecasts for
/// every step with a full window, compositing multi-inset forecasts before
/// scoring. Individual inset failures are recorded as warnings and skipped.
inline CsiSeries run_pipeline(const FrameSequence& seq, const PipelineParams& params) {
    params.validate();
    seq.validate();
    if (static_cast<int>(seq.frames.size()) < params.window)
        throw data_error("sequence shorter than one forecast window");

    const SolarDiskMask located = locate_solar_disk(seq, params.disk_quantile);
    const FrameSequence nodisk = remove_first_mode_disk(seq, located);
    // The forecast horizon assumes a stationary uniform wind, so a bounded
    // sample of frame pairs determines it as well as the whole sequence does
    // -- and keeps optical-flow cost independent of sequence length.
    FrameSequence wind_sample;
    wind_sample.dt = nodisk.dt;
    const std::size_t wind_frames =
        std::min(nodisk.frames.size(), static_cast<std::size_t>(kWindEstimationPairs) + 1);
    wind_sample.frames.assign(nodisk.frames.begin(),
                              nodisk.frames.begin() + static_cast<std::ptrdiff_t>(wind_frames));
    // A featureless (clear-sky) sequence carries no motion information:
    // proceed with zero wind and the identity rotation; no insets will be
    // selected from it anyway.
    WindEstimate wind_raw{0.0, M_PI};
    try {
        wind_raw = estimate_uniform_wind(wind_sample, params.hs_alpha, params.hs_iterations);
    } catch (const data_error&) {
    }
    auto [rotated, disk, wind] = rotate_to_wind_frame(nodisk, wind_raw, located);
    const FrameSequence conditioned = remove_glare(rotated, params.glare_radius);
    const CroppedSequence cropped = crop_upwind(conditioned, disk);

    CsiSeries series;
    series.wind = wind;
    series.disk = disk;
    series.t_max_s = wind.speed > 0.0
                         ? max_horizon(cropped.seq.width(), seq.dt, wind)
                         : std::numeric_limits<double>::infinity();

    const int h = seq.height(), w = seq.width();
    for (int s = params.window - 1; s < static_cast<int>(seq.frames.size()); ++s) {
        std::vector<Image> window(cropped.seq.frames.begin() + (s - params.window + 1),
                                  cropped.seq.frames.begin() + (s + 1));
        const std::vector<Inset> insets =
            select_insets(window, params.inset_quantile, s - params.window + 1);

        StepRow row;
        row.step = s + 1;
        row.time_s = s * seq.dt;
        Image dmd_canvas = Image::Zero(h, w);
        Image frozen_canvas = Image::Zero(h, w);
        std::optional<double> horizon;

        for (const Inset& inset : insets) {
            try {
                const detail::InsetContent dc = detail::dmd_inset_content(
                    cropped, inset, wind, disk, params.r, params.augment_levels);
                const detail::InsetContent fc =
                    detail::frozen_inset_content(cropped, inset, wind, disk);
                detail::composite_content(dmd_canvas, dc, cropped.col_offset);
                detail::composite_content(frozen_canvas, fc, cropped.col_offset);
                series.forecasts.push_back(detail::record_from_content(
                    dc, inset, disk, cropped.col_offset, h, w, "dmd"));
                series.forecasts.push_back(detail::record_from_content(
                    fc, inset, disk, cropped.col_offset, h, w, "frozen_advection"));
                for (const std::string& wmsg : dc.warnings) row.warnings.push_back(wmsg);
                horizon = horizon ? std::min(*horizon, dc.t_s) : dc.t_s;
            } catch (const data_error& e) {
                row.warnings.push_back(std::string("inset skipped: ") + e.what());
            } catch (const numeric_error& e) {
                row.warnings.push_back(std::string("inset skipped: ") + e.what());
            }
        }

        clamp01_in_place(dmd_canvas);
        clamp01_in_place(frozen_canvas);
        row.dmd_k = csi_of_frame(dmd_canvas, disk);
        row.frozen_k = csi_of_frame(frozen_canvas, disk);
        row.actual_k = csi_of_frame(conditioned.frames[static_cast<std::size_t>(s)], disk);
        row.horizon_s = horizon.value_or(0.0);

        series.times.push_back(row.time_s);
        series.actual.push_back(row.actual_k);
        series.rows.push_back(std::move(row));
        series.dmd_composites.push_back(std::move(dmd_canvas));
    }
    return series;
}

}  // namespace skydmd
