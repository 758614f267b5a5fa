#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <tuple>

#include "skydmd/core.hpp"
#include "skydmd/preprocessing.hpp"

namespace skydmd {

/// Dense optical flow: u is the column (horizontal) velocity, v the row
/// (vertical) velocity, both in px per step.
struct FlowField {
    Image u, v;
};

/// Uniform advection estimate: speed in px per step, direction of motion in
/// image coordinates (angle = atan2(row velocity, column velocity)).
struct WindEstimate {
    double speed = 0.0;
    double angle = 0.0;
};

namespace detail {

// Clamped-index shift A(i+di, j+dj) used by the Horn-Schunck stencils.
inline double shifted(const Image& a, int i, int j, int di, int dj) {
    const int r = std::clamp(i + di, 0, static_cast<int>(a.rows()) - 1);
    const int c = std::clamp(j + dj, 0, static_cast<int>(a.cols()) - 1);
    return a(r, c);
}

struct HsStencils {
    Image ix, iy, it, grad;
};

// Classical 2x2x2 finite-difference derivative estimates.
inline HsStencils hs_stencils(const Image& a, const Image& b) {
    const int h = static_cast<int>(a.rows()), w = static_cast<int>(a.cols());
    HsStencils s{Image(h, w), Image(h, w), Image(h, w), Image(h, w)};
    for (int j = 0; j < w; ++j) {
        for (int i = 0; i < h; ++i) {
            const double ix =
                0.25 * (shifted(a, i, j, 0, 1) - a(i, j) + shifted(a, i, j, 1, 1) -
                        shifted(a, i, j, 1, 0) + shifted(b, i, j, 0, 1) - b(i, j) +
                        shifted(b, i, j, 1, 1) - shifted(b, i, j, 1, 0));
            const double iy =
                0.25 * (shifted(a, i, j, 1, 0) - a(i, j) + shifted(a, i, j, 1, 1) -
                        shifted(a, i, j, 0, 1) + shifted(b, i, j, 1, 0) - b(i, j) +
                        shifted(b, i, j, 1, 1) - shifted(b, i, j, 0, 1));
            const double it =
                0.25 * (b(i, j) - a(i, j) + shifted(b, i, j, 1, 0) - shifted(a, i, j, 1, 0) +
                        shifted(b, i, j, 0, 1) - shifted(a, i, j, 0, 1) +
                        shifted(b, i, j, 1, 1) - shifted(a, i, j, 1, 1));
            s.ix(i, j) = ix;
            s.iy(i, j) = iy;
            s.it(i, j) = it;
            s.grad(i, j) = std::sqrt(ix * ix + iy * iy);
        }
    }
    return s;
}

// 3x3 neighborhood average with 1/6 edge and 1/12 diagonal weights.
inline Image neighborhood_average(const Image& f) {
    const int h = static_cast<int>(f.rows()), w = static_cast<int>(f.cols());
    Image out(h, w);
    for (int j = 0; j < w; ++j)
        for (int i = 0; i < h; ++i)
            out(i, j) = (shifted(f, i, j, -1, 0) + shifted(f, i, j, 1, 0) +
                         shifted(f, i, j, 0, -1) + shifted(f, i, j, 0, 1)) /
                            6.0 +
                        (shifted(f, i, j, -1, -1) + shifted(f, i, j, -1, 1) +
                         shifted(f, i, j, 1, -1) + shifted(f, i, j, 1, 1)) /
                            12.0;
    return out;
}

}  // namespace detail

/// Horn-Schunck optical flow between two frames: Jacobi iterations
/// u <- u_bar - Ix (Ix u_bar + Iy v_bar + It) / (alpha^2 + Ix^2 + Iy^2),
/// stopping at the iteration cap or when the largest update falls below
/// 1e-4.
inline FlowField horn_schunck_flow(const Image& a, const Image& b, double alpha,
                                   int iterations) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw data_error("optical flow frames have mismatched shapes");
    if (a.rows() < 2 && a.cols() < 2)
        throw data_error("optical flow needs frames larger than 1x1");
    if (alpha <= 0.0) throw config_error("Horn-Schunck alpha must be positive");
    if (iterations < 1) throw config_error("Horn-Schunck needs at least one iteration");

    const detail::HsStencils s = detail::hs_stencils(a, b);
    const Image denom =
        (alpha * alpha + s.ix.array().square() + s.iy.array().square()).matrix();

    FlowField flow{Image::Zero(a.rows(), a.cols()), Image::Zero(a.rows(), a.cols())};
    for (int it = 0; it < iterations; ++it) {
        const Image ub = detail::neighborhood_average(flow.u);
        const Image vb = detail::neighborhood_average(flow.v);
        const Image t = ((s.ix.array() * ub.array() + s.iy.array() * vb.array() +
                          s.it.array()) /
                         denom.array())
                            .matrix();
        const Image un = ub - (s.ix.array() * t.array()).matrix();
        const Image vn = vb - (s.iy.array() * t.array()).matrix();
        const double delta = std::max((un - flow.u).cwiseAbs().maxCoeff(),
                                      (vn - flow.v).cwiseAbs().maxCoeff());
        flow.u = un;
        flow.v = vn;
        if (delta < 1e-4) break;
    }
    return flow;
}

/// Averages per-pair Horn-Schunck flow over the sequence, weighting each
/// pixel by its gradient magnitude (flow is only informative where texture
/// exists), and reduces to a single speed and direction.
inline WindEstimate estimate_uniform_wind(const FrameSequence& seq, double alpha,
                                          int iterations) {
    seq.validate();
    if (seq.frames.size() < 2) throw data_error("wind estimation needs at least 2 frames");
    double sum_u = 0.0, sum_v = 0.0, sum_w = 0.0;
    for (std::size_t k = 0; k + 1 < seq.frames.size(); ++k) {
        const FlowField flow =
            horn_schunck_flow(seq.frames[k], seq.frames[k + 1], alpha, iterations);
        const detail::HsStencils s = detail::hs_stencils(seq.frames[k], seq.frames[k + 1]);
        sum_u += (s.grad.array() * flow.u.array()).sum();
        sum_v += (s.grad.array() * flow.v.array()).sum();
        sum_w += s.grad.sum();
    }
    if (sum_w < 1e-9) throw data_error("no wind observable: sequence has no texture");
    const double mu = sum_u / sum_w, mv = sum_v / sum_w;
    return {std::hypot(mu, mv), std::atan2(mv, mu)};
}

/// Rotates a frame about `center` so that a feature at p maps to
/// center + R(phi) (p - center), with R acting on (row, col) offsets;
/// bilinear interpolation, zero fill outside the source frame.
inline Image rotate_frame(const Image& f, double phi, double center_row,
                          double center_col) {
    const int h = static_cast<int>(f.rows()), w = static_cast<int>(f.cols());
    const double ct = std::cos(-phi), st = std::sin(-phi);  // inverse map
    Image out(h, w);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) {
            const double y = center_row + (r - center_row) * ct - (c - center_col) * st;
            const double x = center_col + (r - center_row) * st + (c - center_col) * ct;
            const int y0 = static_cast<int>(std::floor(y));
            const int x0 = static_cast<int>(std::floor(x));
            const double fy = y - y0, fx = x - x0;
            auto at = [&](int yy, int xx) {
                return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? f(yy, xx) : 0.0;
            };
            out(r, c) = at(y0, x0) * (1 - fy) * (1 - fx) + at(y0, x0 + 1) * (1 - fy) * fx +
                        at(y0 + 1, x0) * fy * (1 - fx) + at(y0 + 1, x0 + 1) * fy * fx;
        }
    }
    return out;
}

/// Rotates the sequence about the frame center so the estimated wind points
/// right-to-left (angle exactly pi); the disk center is transformed by the
/// same rotation.
inline std::tuple<FrameSequence, SolarDiskMask, WindEstimate> rotate_to_wind_frame(
    const FrameSequence& seq, const WindEstimate& wind, const SolarDiskMask& disk) {
    seq.validate();
    const double phi = wind.angle - M_PI;  // forward (row,col) rotation angle
    const WindEstimate out_wind{wind.speed, M_PI};
    if (std::abs(phi) < 1e-12) return {seq, disk, out_wind};

    const double cy = (seq.height() - 1) / 2.0, cx = (seq.width() - 1) / 2.0;
    FrameSequence rotated;
    rotated.dt = seq.dt;
    rotated.frames.reserve(seq.frames.size());
    for (const Image& f : seq.frames) rotated.frames.push_back(rotate_frame(f, phi, cy, cx));

    const double ct = std::cos(phi), st = std::sin(phi);
    const double new_row = cy + (disk.row - cy) * ct - (disk.col - cx) * st;
    const double new_col = cx + (disk.row - cy) * st + (disk.col - cx) * ct;
    return {std::move(rotated),
            build_disk_mask(seq.height(), seq.width(), new_row, new_col, disk.radius),
            out_wind};
}

/// Frames restricted to the solar-upwind rectangle, plus the column offset
/// of the crop within the source frame (so original column indices are
/// col_offset + cropped index).
struct CroppedSequence {
    FrameSequence seq;
    int col_offset = 0;
};

constexpr int kCropMarginPx = 2;

/// Retains the columns strictly upwind of the disk (motion right-to-left):
/// from ceil(disk col + disk radius) + margin to the right frame edge.
inline CroppedSequence crop_upwind(const FrameSequence& seq, const SolarDiskMask& disk) {
    seq.validate();
    const int c0 = static_cast<int>(std::ceil(disk.col + disk.radius)) + kCropMarginPx;
    if (c0 >= seq.width()) throw data_error("empty upwind region: disk too close to frame edge");
    CroppedSequence out;
    out.col_offset = c0;
    out.seq.dt = seq.dt;
    out.seq.frames.reserve(seq.frames.size());
    for (const Image& f : seq.frames)
        out.seq.frames.push_back(f.rightCols(seq.width() - c0));
    return out;
}

}  // namespace skydmd
