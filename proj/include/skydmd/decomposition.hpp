#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <complex>
#include <string>
#include <vector>

#include "skydmd/core.hpp"

namespace skydmd {

/// Space-by-time data matrix: N pixels (or stacked states) by M samples,
/// column k holding the state at time (k-1)*dt.
struct SnapshotMatrix {
    Eigen::MatrixXd data;
    double dt = 1.0;
    int height = 0;      // original frame shape when built from images
    int width = 0;
    bool image_valued = false;

    void validate() const {
        if (data.rows() < 1 || data.cols() < 2)
            throw data_error("snapshot matrix needs N >= 1 and M >= 2");
        if (dt <= 0.0) throw config_error("snapshot matrix dt must be positive");
        if (!data.allFinite()) throw numeric_error("snapshot matrix has non-finite entries");
    }
};

/// Flattens frames column-major (image columns stacked end-to-end) into an
/// N x M snapshot matrix.
inline SnapshotMatrix build_snapshot_matrix(const FrameSequence& seq) {
    seq.validate();
    if (seq.frames.size() < 2) throw data_error("snapshot matrix needs at least 2 frames");
    const int n = seq.height() * seq.width();
    SnapshotMatrix x;
    x.data.resize(n, static_cast<Eigen::Index>(seq.frames.size()));
    for (std::size_t k = 0; k < seq.frames.size(); ++k)
        x.data.col(static_cast<Eigen::Index>(k)) =
            Eigen::Map<const Eigen::VectorXd>(seq.frames[k].data(), n);
    x.dt = seq.dt;
    x.height = seq.height();
    x.width = seq.width();
    x.image_valued = true;
    return x;
}

/// Economy SVD factors of a snapshot matrix: X = U diag(S) V^T.
struct PodResult {
    Eigen::MatrixXd spatial_modes;    // U, N x p, orthonormal columns
    Eigen::VectorXd singular_values;  // S, length p, nonincreasing
    Eigen::MatrixXd temporal_modes;   // V, M x p, orthonormal columns
};

inline PodResult compute_pod(const SnapshotMatrix& x) {
    x.validate();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x.data, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Shift-stacks `levels` time-shifted copies: for levels = L the result has
/// (L+1)*N rows and M-L columns, column k = stack(x_k, x_{k+1}, .., x_{k+L}).
inline SnapshotMatrix augment_snapshots(const SnapshotMatrix& x, int levels) {
    x.validate();
    if (levels < 0) throw config_error("augmentation levels must be >= 0");
    if (levels == 0) return x;
    const Eigen::Index n = x.data.rows(), m = x.data.cols();
    if (m <= levels + 1) throw data_error("too few columns for requested augmentation depth");
    SnapshotMatrix out = x;
    out.data.resize(n * (levels + 1), m - levels);
    for (Eigen::Index k = 0; k < m - levels; ++k)
        for (int l = 0; l <= levels; ++l)
            out.data.block(l * n, k, n, 1) = x.data.col(k + l);
    return out;
}

/// Reduced-order linear evolution model x(t) ~ Re(Phi exp(Omega t) b).
struct DmdModel {
    int order = 0;                    // r
    Eigen::MatrixXcd modes;           // Phi, N x r (physical block only)
    Eigen::VectorXcd eigenvalues;     // lambda_i, discrete time
    Eigen::VectorXcd exponents;       // omega_i = log(lambda_i)/dt
    Eigen::VectorXcd amplitudes;      // b = pinv(Phi_full) x0
    double dt = 1.0;
    bool augmented = false;
    int height = 0;
    int width = 0;
    bool image_valued = false;
};

/// What to do when the requested order exceeds the numerically usable rank
/// of X1 (singular values at or below sigma_1 * 1e-12).
enum class rank_policy { strict, shrink };

/// Exact-DMD fit of order r. Augments the snapshots `augment_levels` times,
/// splits into X1/X2, truncates the SVD of X1 to r, and eigendecomposes the
/// projected one-step operator. With rank_policy::strict a deficient X1
/// raises numeric_error; with shrink the order is reduced to the usable rank.
inline DmdModel compute_dmd(const SnapshotMatrix& x, int r, int augment_levels,
                            rank_policy policy = rank_policy::strict) {
    if (r < 1) throw config_error("DMD order must be >= 1");
    const SnapshotMatrix aug = augment_snapshots(x, augment_levels);
    const Eigen::Index rows = aug.data.rows(), cols = aug.data.cols();
    if (r > std::min(rows, cols - 1))
        throw config_error("DMD order exceeds snapshot dimensions");

    const Eigen::MatrixXd x1 = aug.data.leftCols(cols - 1);
    const Eigen::MatrixXd x2 = aug.data.rightCols(cols - 1);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x1, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();

    const double guard = s(0) * 1e-12;
    int usable = 0;
    while (usable < s.size() && s(usable) > guard) ++usable;
    if (usable == 0) throw numeric_error("snapshot matrix is numerically zero");
    if (r > usable) {
        if (policy == rank_policy::strict)
            throw numeric_error("requested DMD order exceeds usable rank (truncation guard)");
        r = usable;
    }

    const Eigen::MatrixXd ur = svd.matrixU().leftCols(r);
    const Eigen::MatrixXd vr = svd.matrixV().leftCols(r);
    const Eigen::VectorXd sr_inv = s.head(r).cwiseInverse();
    const Eigen::MatrixXd x2_proj = x2 * vr * sr_inv.asDiagonal();
    const Eigen::MatrixXd a_tilde = ur.transpose() * x2_proj;

    Eigen::EigenSolver<Eigen::MatrixXd> eig(a_tilde);
    if (eig.info() != Eigen::Success)
        throw numeric_error("eigendecomposition of the projected operator failed");

    DmdModel model;
    model.order = r;
    model.eigenvalues = eig.eigenvalues();
    model.dt = aug.dt;
    model.augmented = augment_levels > 0;
    model.height = x.height;
    model.width = x.width;
    model.image_valued = x.image_valued;

    const Eigen::MatrixXcd phi_full = x2_proj * eig.eigenvectors();
    model.amplitudes = phi_full.completeOrthogonalDecomposition().solve(
        aug.data.col(0).cast<std::complex<double>>().eval());

    const Eigen::Index n_phys = rows / (augment_levels + 1);
    model.modes = phi_full.topRows(n_phys);

    model.exponents.resize(r);
    for (int i = 0; i < r; ++i)
        model.exponents(i) = std::log(model.eigenvalues(i)) / model.dt;
    return model;
}

/// Evaluates Re(Phi exp(Omega t) b). Image-valued models are clamped to
/// [0,1]; a non-finite evaluation (overflowing unstable mode) raises
/// numeric_error.
inline Eigen::VectorXd evaluate_dmd(const DmdModel& model, double t) {
    if (t < 0.0) throw config_error("DMD evaluation time must be >= 0");
    Eigen::VectorXcd weights(model.order);
    for (int i = 0; i < model.order; ++i)
        weights(i) = std::exp(model.exponents(i) * t) * model.amplitudes(i);
    if (!weights.allFinite())
        throw numeric_error("non-finite exponent*t product: horizon too long for model");
    Eigen::VectorXd out = (model.modes * weights).real();
    if (!out.allFinite())
        throw numeric_error("non-finite DMD evaluation: horizon too long for model");
    if (model.image_valued) out = out.cwiseMax(0.0).cwiseMin(1.0);
    return out;
}

/// In-sample diagnostic: column k = evaluate_dmd at t = (k-1)*dt.
inline SnapshotMatrix reconstruct_series(const DmdModel& model, int steps) {
    if (steps < 1) throw config_error("reconstruction needs steps >= 1");
    SnapshotMatrix out;
    out.data.resize(model.modes.rows(), steps);
    for (int k = 0; k < steps; ++k)
        out.data.col(k) = evaluate_dmd(model, k * model.dt);
    out.dt = model.dt;
    out.height = model.height;
    out.width = model.width;
    out.image_valued = model.image_valued;
    return out;
}

}  // namespace skydmd
