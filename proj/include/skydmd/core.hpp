#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace skydmd {

/// Bad or inconsistent configuration (CLI exit code 1).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unusable input data: unreadable files, degenerate sequences, undetectable
/// features (CLI exit code 2).
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure: rank guards, overflow, non-finite results (CLI exit
/// code 3).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Grayscale frame, entries normalized to [0,1]; (row, col) indexing.
using Image = Eigen::MatrixXd;

/// Ordered frames with a uniform time step.
struct FrameSequence {
    std::vector<Image> frames;
    double dt = 1.0;

    int height() const { return frames.empty() ? 0 : static_cast<int>(frames.front().rows()); }
    int width() const { return frames.empty() ? 0 : static_cast<int>(frames.front().cols()); }

    void validate() const {
        if (frames.empty()) throw data_error("frame sequence is empty");
        if (dt <= 0.0) throw config_error("frame sequence dt must be positive");
        const auto r = frames.front().rows(), c = frames.front().cols();
        for (const Image& f : frames)
            if (f.rows() != r || f.cols() != c)
                throw data_error("frame sequence has mismatched frame shapes");
    }
};

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

inline void clamp01_in_place(Image& img) {
    img = img.cwiseMax(0.0).cwiseMin(1.0);
}

/// Linear-interpolation quantile of a sample (q in [0,1]); the sample is
/// copied and sorted internally.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw data_error("quantile of an empty sample");
    if (q < 0.0 || q > 1.0) throw config_error("quantile fraction outside [0,1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

/// Half-open pixel rectangle [row0,row1) x [col0,col1).
struct PixelBox {
    int row0 = 0, row1 = 0, col0 = 0, col1 = 0;

    int height() const { return row1 - row0; }
    int width() const { return col1 - col0; }
    bool overlaps(const PixelBox& o) const {
        return row0 < o.row1 && o.row0 < row1 && col0 < o.col1 && o.col0 < col1;
    }
    PixelBox merged(const PixelBox& o) const {
        return {std::min(row0, o.row0), std::max(row1, o.row1),
                std::min(col0, o.col0), std::max(col1, o.col1)};
    }
};

using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// One 8-connected component of a boolean mask.
struct Component {
    std::vector<std::pair<int, int>> pixels;  // (row, col)
    PixelBox box;
};

/// 8-connected components of `mask`, unordered.
inline std::vector<Component> connected_components(const BoolMask& mask) {
    const int h = static_cast<int>(mask.rows());
    const int w = static_cast<int>(mask.cols());
    std::vector<Component> out;
    BoolMask seen = BoolMask::Constant(h, w, false);
    std::vector<std::pair<int, int>> stack;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask(r, c) || seen(r, c)) continue;
            Component comp;
            comp.box = {r, r + 1, c, c + 1};
            stack.push_back({r, c});
            seen(r, c) = true;
            while (!stack.empty()) {
                auto [pr, pc] = stack.back();
                stack.pop_back();
                comp.pixels.push_back({pr, pc});
                comp.box.row0 = std::min(comp.box.row0, pr);
                comp.box.row1 = std::max(comp.box.row1, pr + 1);
                comp.box.col0 = std::min(comp.box.col0, pc);
                comp.box.col1 = std::max(comp.box.col1, pc + 1);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = pr + dr, nc = pc + dc;
                        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                        if (!mask(nr, nc) || seen(nr, nc)) continue;
                        seen(nr, nc) = true;
                        stack.push_back({nr, nc});
                    }
                }
            }
            out.push_back(std::move(comp));
        }
    }
    return out;
}

}  // namespace skydmd
