#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "skydmd/core.hpp"
#include "skydmd/decomposition.hpp"

namespace skydmd {

/// Solar disk location plus its pixel mask.
struct SolarDiskMask {
    double row = 0.0, col = 0.0;
    double radius = 1.0;
    BoolMask mask;
};

/// Builds the boolean in-disk mask for the given geometry; radius is clamped
/// to at least 1 px.
inline SolarDiskMask build_disk_mask(int height, int width, double row, double col,
                                     double radius) {
    SolarDiskMask d;
    d.row = row;
    d.col = col;
    d.radius = std::max(radius, 1.0);
    d.mask = BoolMask::Constant(height, width, false);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            d.mask(r, c) = (r - row) * (r - row) + (c - col) * (c - col) <=
                           d.radius * d.radius;
    return d;
}

/// First POD mode as a nonnegative image: sigma_1 * mean(v_1) * u_1,
/// un-flattened column-major. The mean-of-v1 weighting resolves the SVD sign
/// ambiguity for sequences dominated by a constant component.
inline Image first_pod_mode_image(const PodResult& pod, int height, int width) {
    const double coeff = pod.singular_values(0) * pod.temporal_modes.col(0).mean();
    Image img(height, width);
    Eigen::Map<Eigen::VectorXd>(img.data(), img.size()) =
        coeff * pod.spatial_modes.col(0);
    return img;
}

/// Locates the brightest temporally constant feature: thresholds the first
/// POD mode at `threshold_quantile` and fits the largest 8-connected blob
/// with a centroid and equivalent-area radius.
inline SolarDiskMask locate_solar_disk(const FrameSequence& seq,
                                       double threshold_quantile = 0.995) {
    seq.validate();
    if (seq.frames.size() < 2) throw data_error("disk localization needs at least 2 frames");
    const SnapshotMatrix x = build_snapshot_matrix(seq);
    const PodResult pod = compute_pod(x);

    const double sigma1 = pod.singular_values(0);
    if (sigma1 > 1e-12 && std::abs(pod.temporal_modes.col(0).mean()) < 1e-9)
        throw data_error("no detectable disk: first temporal mode has near-zero mean "
                         "(no constant component)");

    const Image mode = first_pod_mode_image(pod, seq.height(), seq.width());
    std::vector<double> values(mode.data(), mode.data() + mode.size());
    const double threshold = quantile(values, threshold_quantile);
    const BoolMask above = mode.array() > threshold;
    if (!above.any()) throw data_error("no detectable disk: no above-threshold pixels");

    const std::vector<Component> comps = connected_components(above);
    const Component* best = &comps.front();
    for (const Component& c : comps)
        if (c.pixels.size() > best->pixels.size()) best = &c;

    double row = 0.0, col = 0.0;
    for (auto [r, c] : best->pixels) {
        row += r;
        col += c;
    }
    const double n = static_cast<double>(best->pixels.size());
    return build_disk_mask(seq.height(), seq.width(), row / n, col / n,
                           std::sqrt(n / M_PI));
}

/// Subtracts the rank-1 first POD mode from every frame and adds back its
/// out-of-disk portion, i.e. removes the static disk brightness while
/// preserving time-varying content crossing the disk. Output clamped to
/// [0,1].
inline FrameSequence remove_first_mode_disk(const FrameSequence& seq,
                                            const SolarDiskMask& disk) {
    seq.validate();
    if (disk.mask.rows() != seq.height() || disk.mask.cols() != seq.width())
        throw data_error("disk mask shape does not match frames");
    const SnapshotMatrix x = build_snapshot_matrix(seq);
    const PodResult pod = compute_pod(x);

    Image u1(seq.height(), seq.width());
    Eigen::Map<Eigen::VectorXd>(u1.data(), u1.size()) = pod.spatial_modes.col(0);

    FrameSequence out;
    out.dt = seq.dt;
    out.frames.reserve(seq.frames.size());
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        const double coeff =
            pod.singular_values(0) * pod.temporal_modes(static_cast<Eigen::Index>(k), 0);
        Image f = seq.frames[k];
        for (int c = 0; c < seq.width(); ++c)
            for (int r = 0; r < seq.height(); ++r)
                if (disk.mask(r, c)) f(r, c) -= coeff * u1(r, c);
        clamp01_in_place(f);
        out.frames.push_back(std::move(f));
    }
    return out;
}

/// Per-column glare baseline: sequence-wide column minima smoothed by a
/// centered moving average (the window shrinks symmetrically at the edges).
struct GlareProfile {
    Eigen::VectorXd values;
};

inline GlareProfile compute_glare_profile(const FrameSequence& seq, int smoothing_radius) {
    seq.validate();
    const int w = seq.width();
    if (smoothing_radius < 0) throw config_error("glare smoothing radius must be >= 0");
    if (smoothing_radius >= w) throw config_error("glare smoothing radius must be < frame width");

    Eigen::VectorXd g = Eigen::VectorXd::Constant(w, std::numeric_limits<double>::infinity());
    for (const Image& f : seq.frames)
        g = g.cwiseMin(f.colwise().minCoeff().transpose());

    GlareProfile profile;
    profile.values.resize(w);
    for (int j = 0; j < w; ++j) {
        const int rho = std::min({smoothing_radius, j, w - 1 - j});
        profile.values(j) = g.segment(j - rho, 2 * rho + 1).mean();
    }
    return profile;
}

/// Subtracts the smoothed per-column glare baseline from every frame,
/// clamping at 0.
inline FrameSequence remove_glare(const FrameSequence& seq, int smoothing_radius = 5) {
    const GlareProfile profile = compute_glare_profile(seq, smoothing_radius);
    FrameSequence out;
    out.dt = seq.dt;
    out.frames.reserve(seq.frames.size());
    for (const Image& f : seq.frames) {
        Image g = f;
        for (int j = 0; j < seq.width(); ++j)
            g.col(j).array() -= profile.values(j);
        out.frames.push_back(g.cwiseMax(0.0));
    }
    return out;
}

}  // namespace skydmd
