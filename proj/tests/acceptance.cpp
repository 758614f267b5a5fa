// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is independent; a throw inside one marks it failed
// without stopping the others.
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "skydmd/skydmd.hpp"

using namespace skydmd;
namespace fs = std::filesystem;
using cplx = std::complex<double>;

namespace {

struct check_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw check_failure(what);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd orthonormal_patterns(int n, int count, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(n, count);
    for (int c = 0; c < count; ++c)
        for (int r = 0; r < n; ++r) m(r, c) = g(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return Eigen::MatrixXd(qr.householderQ()) .leftCols(count);
}

Image gaussian_blob(int h, int w, double row, double col, double sigma, double amp) {
    Image f(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double d2 = (r - row) * (r - row) + (c - col) * (c - col);
            f(r, c) = amp * std::exp(-d2 / (2.0 * sigma * sigma));
        }
    return f;
}

double angle_gap(double a, double b) {
    double d = std::fmod(std::abs(a - b), 2.0 * M_PI);
    return std::min(d, 2.0 * M_PI - d);
}

// --- criterion bodies ---------------------------------------------------

void spectral_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::MatrixXd patterns = orthonormal_patterns(40, 3, 1);
    Eigen::VectorXcd omegas(3), coeffs(3);
    omegas << cplx(-0.1, 0.0), cplx(0.0, 0.5), cplx(0.0, -0.5);
    coeffs << cplx(1.2, 0.0), cplx(0.8, 0.0), cplx(0.0, 0.8);
    const SnapshotMatrix x = generate_linear_modes(patterns, omegas, coeffs, 30, 0.5);
    const DmdModel model = compute_dmd(x, 3, 0);
    for (int i = 0; i < 3; ++i) {
        double best = 1e300;
        for (int j = 0; j < model.order; ++j)
            best = std::min(best, std::abs(model.exponents(j) - omegas(i)));
        require(best <= 1e-6, "exponent " + fmt(omegas(i).real()) + "+" +
                                  fmt(omegas(i).imag()) + "i off by " + fmt(best));
    }
    require(seconds_since(t0) < 1.0, "spectral recovery exceeded 1 s");
}

void augmentation_necessity() {
    // Scalar cosine: fit on the first 39 samples, predict the 40th.
    const int fit = 39;
    SnapshotMatrix x;
    x.data.resize(1, fit);
    x.dt = 1.0;
    for (int k = 0; k < fit; ++k) x.data(0, k) = std::cos(0.7 * k);
    const double actual = std::cos(0.7 * fit);

    const DmdModel augmented = compute_dmd(x, 2, 1);
    require(augmented.order == 2, "augmented model should have order 2");
    for (int i = 0; i < 2; ++i)
        require(std::abs(std::abs(augmented.eigenvalues(i)) - 1.0) <= 1e-8,
                "|lambda| = " + fmt(std::abs(augmented.eigenvalues(i))) + " not on unit circle");
    require(std::abs(augmented.eigenvalues(0) - std::conj(augmented.eigenvalues(1))) <= 1e-8,
            "eigenvalues are not a conjugate pair");

    const DmdModel plain = compute_dmd(x, 1, 0);
    const double err_aug = std::abs(evaluate_dmd(augmented, fit * 1.0)(0) - actual);
    const double err_plain = std::abs(evaluate_dmd(plain, fit * 1.0)(0) - actual);
    require(err_plain >= 10.0 * err_aug, "prediction errors " + fmt(err_plain) +
                                             " (order 1) vs " + fmt(err_aug) +
                                             " (augmented): ratio below 10x");
}

void pod_properties() {
    for (unsigned trial = 0; trial < 100; ++trial) {
        std::mt19937 rng(trial);
        std::normal_distribution<double> g(0.0, 1.0);
        SnapshotMatrix x;
        x.data.resize(200, 20);
        x.dt = 1.0;
        for (int c = 0; c < 20; ++c)
            for (int r = 0; r < 200; ++r) x.data(r, c) = g(rng);

        const PodResult pod = compute_pod(x);
        const int p = static_cast<int>(pod.singular_values.size());
        const Eigen::MatrixXd iu = pod.spatial_modes.transpose() * pod.spatial_modes;
        const Eigen::MatrixXd iv = pod.temporal_modes.transpose() * pod.temporal_modes;
        require((iu - Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() <= 1e-10,
                "spatial modes not orthonormal at trial " + std::to_string(trial));
        require((iv - Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() <= 1e-10,
                "temporal modes not orthonormal at trial " + std::to_string(trial));
        for (int i = 1; i < p; ++i)
            require(pod.singular_values(i) <= pod.singular_values(i - 1),
                    "singular values increase at trial " + std::to_string(trial));
        const Eigen::MatrixXd rec = pod.spatial_modes * pod.singular_values.asDiagonal() *
                                    pod.temporal_modes.transpose();
        require((rec - x.data).norm() <= 1e-10 * x.data.norm(),
                "reconstruction error above 1e-10 at trial " + std::to_string(trial));
    }
}

void truncation_monotonicity() {
    const Eigen::MatrixXd patterns = orthonormal_patterns(60, 5, 4);
    Eigen::VectorXcd omegas(5), coeffs(5);
    omegas << cplx(0.0, 0.0), cplx(-0.05, 0.0), cplx(-0.12, 0.0), cplx(0.0, 0.03),
        cplx(0.0, -0.03);
    coeffs << cplx(1.0, 0.0), cplx(0.55, 0.0), cplx(0.3, 0.0), cplx(0.15, 0.0),
        cplx(0.0, 0.15);
    const SnapshotMatrix x = generate_linear_modes(patterns, omegas, coeffs, 40, 1.0);

    double prev = 1e300;
    for (int r = 1; r <= 5; ++r) {
        const DmdModel model = compute_dmd(x, r, 0);
        const SnapshotMatrix rec = reconstruct_series(model, 40);
        const double err = (rec.data - x.data).norm() / x.data.norm();
        require(err <= prev + 1e-9, "error rose from " + fmt(prev) + " to " + fmt(err) +
                                        " at r = " + std::to_string(r));
        prev = err;
    }
    require(prev <= 1e-8, "full-order fit of exactly rank-5 data left error " + fmt(prev));
}

void disk_localization() {
    for (unsigned seed = 0; seed < 20; ++seed) {
        std::mt19937 rng(seed + 100);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

        SynthScenario sc;
        sc.height = 120;
        sc.width = 160;
        sc.steps = 60;
        sc.dt = 2.0;
        sc.disk.row = uni(40.0, 80.0);
        sc.disk.col = uni(25.0, 50.0);
        sc.disk.radius = uni(5.0, 8.0);
        sc.disk.brightness = uni(0.4, 0.7);
        // Clouds must genuinely move -- each blob crosses at least ~5x its
        // own sigma over the run -- or temporal constancy cannot tell a
        // near-static cloud from the sun, and no localizer could either.
        const int blobs = 1 + static_cast<int>(uni(0.0, 3.0));
        for (int b = 0; b < blobs; ++b) {
            BlobSpec blob;
            blob.row = uni(20.0, 100.0);
            blob.col = uni(110.0, 140.0);
            blob.sigma = uni(4.0, 6.5);
            blob.amplitude = uni(0.4, 0.65);
            blob.vel_col = uni(-0.8, -0.5);
            sc.blobs.push_back(blob);
        }
        const auto [seq, truth] = generate(sc, seed);
        const double q =
            1.0 - 1.3 * M_PI * sc.disk.radius * sc.disk.radius / (sc.height * sc.width);
        const SolarDiskMask found = locate_solar_disk(seq, q);
        require(std::abs(found.row - sc.disk.row) <= 1.0,
                "row off by " + fmt(found.row - sc.disk.row) + " at seed " +
                    std::to_string(seed));
        require(std::abs(found.col - sc.disk.col) <= 1.0,
                "col off by " + fmt(found.col - sc.disk.col) + " at seed " +
                    std::to_string(seed));
        require(std::abs(found.radius - sc.disk.radius) <= 1.0,
                "radius off by " + fmt(found.radius - sc.disk.radius) + " at seed " +
                    std::to_string(seed));
    }
}

void glare_removal() {
    const int h = 40, w = 80;
    auto ramp_frames = [&](double blob_row, double amp) {
        FrameSequence seq;
        seq.dt = 1.0;
        for (int k = 0; k < 6; ++k) {
            Image f(h, w);
            for (int c = 0; c < w; ++c)
                f.col(c).setConstant(0.3 * (1.0 - static_cast<double>(c) / w));
            f += gaussian_blob(h, w, blob_row, 60.0 - 4.0 * k, 3.0, amp);
            seq.frames.push_back(f.cwiseMax(0.0).cwiseMin(1.0));
        }
        return seq;
    };

    // Background residual in cloud-free pixels (rows >= 6.7 sigma away).
    const FrameSequence res = remove_glare(ramp_frames(10.0, 0.5), 5);
    for (const Image& f : res.frames)
        for (int r = 30; r < h; ++r)
            for (int c = 0; c < w; ++c)
                require(std::abs(f(r, c)) <= 1e-8,
                        "cloud-free residual " + fmt(f(r, c)) + " at row " +
                            std::to_string(r));

    // Blob contrast: after removal the background is ~0, so the peak is the
    // contrast itself.
    const double amp = 0.5;
    const FrameSequence con = remove_glare(ramp_frames(20.0, amp), 5);
    for (const Image& f : con.frames)
        require(std::abs(f.maxCoeff() - amp) <= 0.01 * amp,
                "contrast drifted to " + fmt(f.maxCoeff()));

    // Idempotence.
    const FrameSequence p1 = remove_glare(ramp_frames(10.0, amp), 5);
    const FrameSequence p2 = remove_glare(p1, 5);
    for (std::size_t k = 0; k < p1.frames.size(); ++k)
        require((p2.frames[k] - p1.frames[k]).cwiseAbs().maxCoeff() <= 1e-10,
                "second pass changed frame " + std::to_string(k));
}

void wind_estimation() {
    for (unsigned seed = 0; seed < 20; ++seed) {
        std::mt19937 rng(seed + 500);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

        const double speed = uni(0.5, 2.0);
        const double theta = uni(0.0, 2.0 * M_PI);
        const double vr = speed * std::sin(theta), vc = speed * std::cos(theta);
        const int h = 96, w = 128, frames = 4;
        const double centers[3][2] = {{45.0 + uni(-3.0, 3.0), 55.0 + uni(-3.0, 3.0)},
                                      {70.0 + uni(-3.0, 3.0), 95.0 + uni(-3.0, 3.0)},
                                      {55.0 + uni(-3.0, 3.0), 75.0 + uni(-3.0, 3.0)}};
        const double sigmas[3] = {uni(5.0, 7.0), uni(5.0, 7.0), uni(5.0, 7.0)};
        const double amps[3] = {uni(0.7, 0.9), uni(0.7, 0.9), uni(0.7, 0.9)};

        FrameSequence seq;
        seq.dt = 1.0;
        for (int k = 0; k < frames; ++k) {
            Image f = Image::Zero(h, w);
            for (int b = 0; b < 3; ++b)
                f += gaussian_blob(h, w, centers[b][0] + vr * k, centers[b][1] + vc * k,
                                   sigmas[b], amps[b]);
            seq.frames.push_back(f.cwiseMin(1.0));
        }
        const WindEstimate est = estimate_uniform_wind(seq, 0.02, 2000);
        require(std::abs(est.speed - speed) <= 0.1 * speed,
                "speed " + fmt(est.speed) + " vs true " + fmt(speed) + " at seed " +
                    std::to_string(seed));
        require(angle_gap(est.angle, theta) <= 0.1,
                "angle " + fmt(est.angle) + " vs true " + fmt(theta) + " at seed " +
                    std::to_string(seed));
    }
}

SynthScenario dissolving_scenario() {
    SynthScenario sc;
    sc.height = 120;
    sc.width = 160;
    sc.steps = 210;
    sc.dt = 2.0;
    sc.disk = {60.0, 25.0, 6.0, 0.5};
    BlobSpec main;
    main.row = 60.0;
    main.col = 122.0;
    main.sigma = 8.0;
    main.amplitude = 0.85;
    main.vel_col = -0.4;
    main.law = amplitude_law::exponential;
    main.rate = -0.006;
    BlobSpec helper;
    helper.row = 18.0;
    helper.col = 118.0;
    helper.sigma = 5.0;
    helper.amplitude = 0.75;
    helper.vel_col = -0.4;
    sc.blobs = {main, helper};
    return sc;
}

PipelineParams dissolving_params() {
    PipelineParams p;
    p.r = 3;
    p.window = 8;
    p.augment_levels = 1;
    p.hs_alpha = 0.05;
    p.hs_iterations = 500;
    p.disk_quantile = 0.9923;
    p.inset_quantile = 0.98;
    p.glare_radius = 5;
    return p;
}

void early_dissolution_detection() {
    const auto t0 = std::chrono::steady_clock::now();
    const SynthScenario sc = dissolving_scenario();
    const auto [seq, truth] = generate(sc, 0);
    const CsiSeries series = run_pipeline(seq, dissolving_params());
    const double elapsed = seconds_since(t0);

    const std::optional<int> dmd = first_detection_step(series.rows, &StepRow::dmd_k);
    const std::optional<int> frozen = first_detection_step(series.rows, &StepRow::frozen_k);
    require(dmd.has_value(), "DMD never detects dissolution");
    require(frozen.has_value(), "frozen advection never detects dissolution");
    const double gap_s = (*frozen - *dmd) * sc.dt;
    require(gap_s >= 120.0, "detection gap " + fmt(gap_s) + " s (DMD step " +
                                std::to_string(*dmd) + ", frozen step " +
                                std::to_string(*frozen) + ") below 120 s");
    require(elapsed < 60.0, "end-to-end run took " + fmt(elapsed) + " s");
}

void frozen_dynamics_agreement() {
    SynthScenario sc;
    sc.height = 120;
    sc.width = 160;
    sc.steps = 34;
    sc.dt = 2.0;
    sc.disk = {60.0, 25.0, 5.0, 0.5};
    BlobSpec main;
    main.row = 54.0;
    main.col = 47.5;
    main.sigma = 20.0;
    main.amplitude = 0.45;
    main.vel_col = -0.25;
    BlobSpec h1;
    h1.row = 16.0;
    h1.col = 118.0;
    h1.sigma = 4.5;
    h1.amplitude = 0.45;
    h1.vel_col = -0.25;
    BlobSpec h2 = h1;
    h2.row = 102.0;
    h2.col = 108.0;
    sc.blobs = {main, h1, h2};

    PipelineParams p;
    p.hs_alpha = 0.02;
    p.hs_iterations = 1500;
    p.disk_quantile = 1.0 - 1.3 * M_PI * 25.0 / (120.0 * 160.0);
    p.inset_quantile = 0.85;

    const auto [seq, truth] = generate(sc, 0);
    const CsiSeries series = run_pipeline(seq, p);
    require(!series.rows.empty(), "pipeline produced no forecast rows");
    for (const StepRow& row : series.rows)
        require(std::abs(row.dmd_k - row.frozen_k) <= 0.05,
                "|dK| = " + fmt(std::abs(row.dmd_k - row.frozen_k)) + " at step " +
                    std::to_string(row.step));
}

void horizon_formula() {
    std::mt19937 rng(77);
    std::uniform_int_distribution<int> widths(10, 500);
    std::uniform_real_distribution<double> dts(0.1, 10.0);
    std::uniform_real_distribution<double> speeds(0.05, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const int w = widths(rng);
        const double dt = dts(rng);
        const WindEstimate wind{speeds(rng), M_PI};
        require(max_horizon(w, dt, wind) == w * dt / wind.speed,
                "horizon formula mismatch at trial " + std::to_string(i));
    }
}

void computational_budget() {
    std::mt19937 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    SnapshotMatrix x;
    x.data.resize(10000, 100);
    x.dt = 1.0;
    for (int c = 0; c < 100; ++c)
        for (int r = 0; r < 10000; ++r) x.data(r, c) = g(rng);
    const auto t0 = std::chrono::steady_clock::now();
    const DmdModel model = compute_dmd(x, 3, 1);
    const double elapsed = seconds_since(t0);
    require(model.order == 3, "fit returned wrong order");
    require(elapsed <= 7.0, "single DMD fit took " + fmt(elapsed) + " s");
}

void determinism() {
    const fs::path dir = fs::temp_directory_path() / "skydmd_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path scen = dir / "scenario.json";
    {
        std::ofstream out(scen);
        out << R"({"height": 80, "width": 120, "steps": 20, "dt": 2.0,
                   "disk": {"row": 40, "col": 18, "radius": 5, "brightness": 0.5},
                   "blobs": [{"row": 40, "col": 80, "sigma": 7, "amplitude": 0.6,
                              "vel_col": -0.5, "law": "constant"}],
                   "glare_amplitude": 0.1, "noise_amplitude": 0.002})";
    }
    RunConfig cfg;
    cfg.input = scen;
    cfg.params.disk_quantile = 1.0 - 1.3 * M_PI * 25.0 / (80.0 * 120.0);
    cfg.params.hs_alpha = 0.05;
    cfg.params.hs_iterations = 500;

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    cfg.output_dir = dir / "run1";
    run_forecast_command(cfg);
    cfg.output_dir = dir / "run2";
    run_forecast_command(cfg);
    require(slurp(dir / "run1" / "forecast.csv") == slurp(dir / "run2" / "forecast.csv"),
            "forecast.csv differs between identical runs");
    require(slurp(dir / "run1" / "summary.json") == slurp(dir / "run2" / "summary.json"),
            "summary.json differs between identical runs");
    require(!slurp(dir / "run1" / "forecast.csv").empty(), "forecast.csv is empty");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* label;
        std::function<void()> body;
    };
    const std::vector<Criterion> criteria = {
        {1, "spectral recovery of known exponents within 1e-6 in under 1 s",
         spectral_recovery},
        {2, "shift-stack augmentation: unit-circle pair and 10x better prediction",
         augmentation_necessity},
        {3, "POD orthonormality, reconstruction, and ordering over 100 trials",
         pod_properties},
        {4, "reconstruction error nonincreasing in truncation order on rank-5 data",
         truncation_monotonicity},
        {5, "solar disk located within 1 px center and radius over 20 scenarios",
         disk_localization},
        {6, "glare ramp removed to 1e-8, contrast kept within 1%, idempotent",
         glare_removal},
        {7, "uniform wind recovered within 10% speed / 0.1 rad over 20 scenarios",
         wind_estimation},
        {8, "DMD detects dissolution >= 120 s before frozen advection, under 60 s",
         early_dissolution_detection},
        {9, "DMD and frozen forecasts agree within 0.05 on pure translation",
         frozen_dynamics_agreement},
        {10, "max horizon equals width*dt/speed exactly over 1000 triples",
         horizon_formula},
        {11, "augmented rank-3 DMD fit at 10000x100 completes within 7 s",
         computational_budget},
        {12, "identical config and input give byte-identical CSV/JSON outputs",
         determinism},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        try {
            c.body();
            std::printf("PASS %2d: %s\n", c.id, c.label);
        } catch (const std::exception& e) {
            ++failures;
            std::printf("FAIL %2d: %s -- %s\n", c.id, c.label, e.what());
        }
        std::fflush(stdout);
    }
    if (failures > 0) std::printf("%d of 12 acceptance criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
