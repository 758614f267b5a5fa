#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "skydmd/core.hpp"
#include "skydmd/decomposition.hpp"

namespace skydmd {

/// Amplitude evolution of a synthetic cloud blob.
enum class amplitude_law { constant, exponential, sin_lobe };

/// Isotropic Gaussian blob, truncated at 4 sigma, advecting at a constant
/// velocity. `rate` is the per-second exponent for the exponential law;
/// `period` is the lobe duration in seconds for the sin-lobe law.
struct BlobSpec {
    double row = 0.0, col = 0.0;
    double sigma = 1.0;
    double amplitude = 0.0;
    double vel_row = 0.0, vel_col = 0.0;  // px per step
    amplitude_law law = amplitude_law::constant;
    double rate = 0.0;
    double period = 1.0;
};

/// Static bright solar disk rendered additively onto the cloud field.
struct DiskSpec {
    double row = 0.0, col = 0.0;
    double radius = 1.0;
    double brightness = 0.0;
};

/// Full description of a synthetic sequence with analytically known
/// dynamics. Pixel values are blob sum + glare ramp + disk brightness +
/// noise, clamped to [0,1]; scenarios should keep the noiseless sum within
/// range so the clamp never distorts the closed-form model.
struct SynthScenario {
    int height = 0, width = 0;
    int steps = 0;
    double dt = 1.0;
    DiskSpec disk;
    std::vector<BlobSpec> blobs;
    double glare_amplitude = 0.0;
    double noise_amplitude = 0.0;

    void validate() const {
        if (height < 1 || width < 1) throw config_error("scenario frame shape must be positive");
        if (steps < 1) throw config_error("scenario must have at least one step");
        if (dt <= 0.0) throw config_error("scenario dt must be positive");
        if (disk.radius < 1.0) throw config_error("disk radius must be >= 1 px");
        if (disk.row < 0 || disk.row >= height || disk.col < 0 || disk.col >= width)
            throw config_error("disk center outside frame");
        if (disk.brightness < 0.0 || disk.brightness > 1.0)
            throw config_error("disk brightness outside [0,1]");
        for (const BlobSpec& b : blobs) {
            if (b.sigma <= 0.0) throw config_error("blob sigma must be positive");
            if (b.amplitude < 0.0 || b.amplitude > 1.0)
                throw config_error("blob amplitude outside [0,1]");
            if (b.row < 0 || b.row >= height || b.col < 0 || b.col >= width)
                throw config_error("blob initial center outside frame");
            if (b.law == amplitude_law::sin_lobe && b.period <= 0.0)
                throw config_error("sin-lobe period must be positive");
        }
        if (glare_amplitude < 0.0 || glare_amplitude > 1.0)
            throw config_error("glare amplitude outside [0,1]");
        if (noise_amplitude < 0.0) throw config_error("noise amplitude must be >= 0");
    }
};

/// Per-step closed-form state of one blob.
struct BlobState {
    double row = 0.0, col = 0.0;
    double amplitude = 0.0;
};

/// Analytic ground truth accompanying a generated sequence.
struct TruthRecord {
    double wind_speed = 0.0;  // px per step
    double wind_angle = 0.0;  // direction of motion, radians
    std::vector<double> k;    // true clear-sky index per step
    std::vector<std::vector<BlobState>> blob_states;
};

inline double blob_amplitude_at(const BlobSpec& b, double t_seconds) {
    switch (b.law) {
        case amplitude_law::constant:
            return b.amplitude;
        case amplitude_law::exponential:
            return b.amplitude * std::exp(b.rate * t_seconds);
        case amplitude_law::sin_lobe:
            if (t_seconds < 0.0 || t_seconds > b.period) return 0.0;
            return b.amplitude * std::sin(M_PI * t_seconds / b.period);
    }
    return 0.0;
}

inline BlobState blob_state_at(const BlobSpec& b, double step, double dt) {
    return {b.row + b.vel_row * step, b.col + b.vel_col * step,
            blob_amplitude_at(b, step * dt)};
}

/// True clear-sky index at an arbitrary (continuous) time, from the
/// untruncated closed-form blob model.
inline double true_k_at(const SynthScenario& sc, double t_seconds) {
    const double step = t_seconds / sc.dt;
    double cloud_sum = 0.0;
    long count = 0;
    for (int r = 0; r < sc.height; ++r) {
        for (int c = 0; c < sc.width; ++c) {
            if ((r - sc.disk.row) * (r - sc.disk.row) + (c - sc.disk.col) * (c - sc.disk.col) >
                sc.disk.radius * sc.disk.radius)
                continue;
            ++count;
            for (const BlobSpec& b : sc.blobs) {
                const BlobState st = blob_state_at(b, step, sc.dt);
                if (st.amplitude <= 0.0) continue;
                const double d2 =
                    (r - st.row) * (r - st.row) + (c - st.col) * (c - st.col);
                cloud_sum += st.amplitude * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
            }
        }
    }
    if (count == 0) throw data_error("disk covers no pixels");
    return clamp01(1.0 - cloud_sum / static_cast<double>(count));
}

/// Cloud-only field at step k: sum of Gaussian blobs truncated at 4 sigma.
inline Image cloud_field(const SynthScenario& sc, int step) {
    Image f = Image::Zero(sc.height, sc.width);
    for (const BlobSpec& b : sc.blobs) {
        const BlobState st = blob_state_at(b, step, sc.dt);
        if (st.amplitude <= 0.0) continue;
        const double reach = 4.0 * b.sigma;
        const int r0 = std::max(0, static_cast<int>(std::floor(st.row - reach)));
        const int r1 = std::min(sc.height - 1, static_cast<int>(std::ceil(st.row + reach)));
        const int c0 = std::max(0, static_cast<int>(std::floor(st.col - reach)));
        const int c1 = std::min(sc.width - 1, static_cast<int>(std::ceil(st.col + reach)));
        const double inv = 1.0 / (2.0 * b.sigma * b.sigma);
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double d2 = (r - st.row) * (r - st.row) + (c - st.col) * (c - st.col);
                if (d2 > reach * reach) continue;
                f(r, c) += st.amplitude * std::exp(-d2 * inv);
            }
        }
    }
    return f;
}

/// Renders frames (cloud + glare ramp + disk + optional noise, clamped) and
/// the closed-form truth record. Deterministic for a given seed.
inline std::pair<FrameSequence, TruthRecord> generate(const SynthScenario& sc,
                                                      std::uint64_t seed) {
    sc.validate();
    FrameSequence seq;
    seq.dt = sc.dt;
    seq.frames.reserve(sc.steps);
    TruthRecord truth;

    // In-disk pixel list for the true clear-sky index.
    std::vector<std::pair<int, int>> disk_pixels;
    for (int r = 0; r < sc.height; ++r)
        for (int c = 0; c < sc.width; ++c)
            if ((r - sc.disk.row) * (r - sc.disk.row) +
                    (c - sc.disk.col) * (c - sc.disk.col) <=
                sc.disk.radius * sc.disk.radius)
                disk_pixels.push_back({r, c});

    if (!sc.blobs.empty()) {
        double vr = 0.0, vc = 0.0;
        for (const BlobSpec& b : sc.blobs) {
            vr += b.vel_row;
            vc += b.vel_col;
        }
        vr /= static_cast<double>(sc.blobs.size());
        vc /= static_cast<double>(sc.blobs.size());
        truth.wind_speed = std::hypot(vr, vc);
        truth.wind_angle = truth.wind_speed > 0.0 ? std::atan2(vr, vc) : 0.0;
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-sc.noise_amplitude, sc.noise_amplitude);

    for (int k = 0; k < sc.steps; ++k) {
        Image f = cloud_field(sc, k);

        truth.k.push_back(true_k_at(sc, k * sc.dt));

        std::vector<BlobState> states;
        for (const BlobSpec& b : sc.blobs) states.push_back(blob_state_at(b, k, sc.dt));
        truth.blob_states.push_back(std::move(states));

        if (sc.glare_amplitude > 0.0)
            for (int c = 0; c < sc.width; ++c)
                f.col(c).array() += sc.glare_amplitude * (1.0 - static_cast<double>(c) / sc.width);

        if (sc.disk.brightness > 0.0)
            for (auto [r, c] : disk_pixels) f(r, c) += sc.disk.brightness;

        if (sc.noise_amplitude > 0.0)
            for (int c = 0; c < sc.width; ++c)
                for (int r = 0; r < sc.height; ++r) f(r, c) += noise(rng);

        clamp01_in_place(f);
        seq.frames.push_back(std::move(f));
    }
    return {std::move(seq), std::move(truth)};
}

/// Exact Sum_i c_i exp(omega_i k dt) p_i data for spectral-recovery tests.
/// Pass conjugate pairs of exponents/coefficients to obtain real data.
inline SnapshotMatrix generate_linear_modes(const Eigen::MatrixXd& patterns,
                                            const Eigen::VectorXcd& exponents,
                                            const Eigen::VectorXcd& coefficients,
                                            int m, double dt) {
    const int count = static_cast<int>(patterns.cols());
    if (count < 1) throw config_error("need at least one spatial pattern");
    if (exponents.size() != count || coefficients.size() != count)
        throw config_error("pattern/exponent/coefficient counts disagree");
    if (m < 2 * count + 2) throw config_error("need M >= 2*count + 2 samples");
    if (dt <= 0.0) throw config_error("dt must be positive");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(patterns);
    const Eigen::VectorXd& s = svd.singularValues();
    if (s(s.size() - 1) <= s(0) * 1e-10)
        throw data_error("spatial patterns are linearly dependent");

    SnapshotMatrix x;
    x.data.resize(patterns.rows(), m);
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXcd col = Eigen::VectorXcd::Zero(patterns.rows());
        for (int i = 0; i < count; ++i)
            col += coefficients(i) * std::exp(exponents(i) * (k * dt)) *
                   patterns.col(i).cast<std::complex<double>>();
        x.data.col(k) = col.real();
    }
    x.dt = dt;
    return x;
}

}  // namespace skydmd
